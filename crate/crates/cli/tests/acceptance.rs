//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p rbminit-cli --test acceptance`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use rbminit_cli::beta_table_csv;
use rbminit_cli::experiment::{run_experiment, ExperimentSpec};
use rbminit_core::datasets::{binarize, gen_toy, parse_real_csv, BinarizeMode, Dataset, ToySpec};
use rbminit_core::evaluation::{exact_log_likelihood, mais_log_partition, EvalMode, MaisConfig};
use rbminit_core::meanfield::{
    beta_critical, find_beta_max, magnetizations, solve_saddle_point, susceptibility, HiddenSpace, ModelConfig,
    SearchConfig,
};
use rbminit_core::quadrature::QuadratureRule;
use rbminit_core::rbm::{visible_state, Rbm};
use rbminit_core::rng::stream_rng;
use rbminit_core::training::{exact_gradient, GradientMode, TrainConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// beta_max for {0,1} hidden units; rows alpha = 0.25..3, columns c = 0..-6.
const BINARY_TABLE: [[f64; 7]; 12] = [
    [1.597, 1.873, 2.216, 2.558, 2.887, 3.196, 3.488],
    [1.529, 1.840, 2.227, 2.618, 2.989, 3.338, 3.666],
    [1.511, 1.853, 2.280, 2.712, 3.120, 3.503, 3.863],
    [1.510, 1.879, 2.344, 2.812, 3.255, 3.669, 4.058],
    [1.517, 1.911, 2.409, 2.911, 3.385, 3.829, 4.245],
    [1.527, 1.944, 2.473, 3.007, 3.512, 3.982, 4.424],
    [1.539, 1.977, 2.536, 3.100, 3.633, 4.130, 4.595],
    [1.551, 2.009, 2.596, 3.190, 3.749, 4.271, 4.759],
    [1.564, 2.040, 2.654, 3.275, 3.861, 4.406, 4.917],
    [1.576, 2.070, 2.710, 3.358, 3.968, 4.536, 5.069],
    [1.588, 2.099, 2.764, 3.437, 4.071, 4.662, 5.215],
    [1.600, 2.127, 2.815, 3.514, 4.171, 4.783, 5.356],
];

/// beta_max for {-1,1} hidden units at alpha = 0.5, 1, ..., 3.
const ISING_TABLE: [f64; 6] = [1.456, 1.414, 1.429, 1.456, 1.488, 1.520];

fn binary_golden_table() -> Outcome {
    let alphas: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
    let cs: Vec<f64> = (0..=6).map(|k| 0.0 - k as f64).collect();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let csv = single.install(|| beta_table_csv(&alphas, &cs, HiddenSpace::Binary));
    let elapsed = start.elapsed().as_secs_f64();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    ensure!(rows.len() == 84, "{} rows", rows.len());
    let mut worst = (0.0, 0.0, 0.0);
    for row in &rows {
        let (i, j) = ((row[0] / 0.25).round() as usize - 1, (-row[1]).round() as usize);
        let err = (row[2] - BINARY_TABLE[i][j]).abs();
        ensure!(err <= 0.005, "alpha={} c={}: {} vs {}", row[0], row[1], row[2], BINARY_TABLE[i][j]);
        if err >= worst.0 {
            worst = (err, row[0], row[1]);
        }
    }
    ensure!(elapsed < 300.0, "took {elapsed:.0}s single-threaded");
    Ok(format!("84 cells, max |err| {:.4} at alpha={} c={}, {elapsed:.1}s single-threaded", worst.0, worst.1, worst.2))
}

fn ising_golden_table() -> Outcome {
    let search = SearchConfig::default();
    let (mut numeric_err, mut closed_err) = (0.0f64, 0.0f64);
    for (k, reference) in ISING_TABLE.iter().enumerate() {
        let alpha = 0.5 * (k + 1) as f64;
        let numeric = find_beta_max(alpha, 1e-3, 1e-3, HiddenSpace::Ising, &search).map_err(|e| e.to_string())?;
        ensure!((numeric - reference).abs() <= 0.02, "alpha={alpha}: numeric {numeric} vs {reference}");
        let closed = find_beta_max(alpha, 0.0, 0.0, HiddenSpace::Ising, &search).map_err(|e| e.to_string())?;
        let formula = (alpha.sqrt() + 1.0 / alpha.sqrt()).sqrt();
        ensure!((closed - formula).abs() <= 1e-6, "alpha={alpha}: closed form {closed} vs {formula}");
        numeric_err = numeric_err.max((numeric - reference).abs());
        closed_err = closed_err.max((closed - formula).abs());
    }
    Ok(format!("numeric max |err| {numeric_err:.4}, closed form max |err| {closed_err:.1e}"))
}

fn trivial_phase() -> Outcome {
    let rule = QuadratureRule::default_rule();
    let mut points = 0;
    for alpha in [0.5, 1.0, 2.0] {
        let limit = 0.99 * beta_critical(alpha).map_err(|e| e.to_string())?;
        let betas = (1..).map(|k| 0.01 * k as f64).take_while(|&b| b <= limit).chain([limit]);
        for beta in betas {
            let config = ModelConfig::new(alpha, 0.0, 0.0, HiddenSpace::Ising, beta).map_err(|e| e.to_string())?;
            let saddle = solve_saddle_point(&config, &rule).map_err(|e| e.to_string())?;
            ensure!(saddle.max_component() < 1e-10, "alpha={alpha} beta={beta}: {saddle:?}");
            let chi = susceptibility(&config, &saddle, &rule).map_err(|e| e.to_string())?;
            ensure!(chi.chi_vh.abs() <= 1e-8, "alpha={alpha} beta={beta}: chi_vh {}", chi.chi_vh);
            points += 1;
        }
    }
    Ok(format!("{points} (alpha, beta) points below 0.99 beta_c"))
}

fn susceptibility_vs_finite_differences() -> Outcome {
    let rule = QuadratureRule::default_rule();
    let mut rng = stream_rng(4, 0);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let hidden = if k % 2 == 0 { HiddenSpace::Ising } else { HiddenSpace::Binary };
        // Redraw until the susceptibility is comfortably non-singular.
        let (config, chi) = loop {
            let config = ModelConfig::new(
                rng.gen_range(0.3..3.0),
                rng.gen_range(-0.6..0.6),
                if hidden == HiddenSpace::Ising { rng.gen_range(-0.6..0.6) } else { rng.gen_range(-3.0..0.5) },
                hidden,
                rng.gen_range(0.3..3.0),
            )
            .map_err(|e| e.to_string())?;
            let saddle = solve_saddle_point(&config, &rule).map_err(|e| e.to_string())?;
            match susceptibility(&config, &saddle, &rule) {
                Ok(chi) if chi.det.abs() > 0.05 => break (config, chi),
                _ => continue,
            }
        };
        let h = 1e-4;
        let m_h = |b: f64| -> Result<f64, String> {
            let cfg = ModelConfig { b, ..config };
            let saddle = solve_saddle_point(&cfg, &rule).map_err(|e| e.to_string())?;
            Ok(magnetizations(&cfg, &saddle, &rule).1)
        };
        let fd = (m_h(config.b + h)? - m_h(config.b - h)?) / (2.0 * h);
        let err = (chi.chi_vh - fd).abs();
        ensure!(err < 1e-4, "{config:?}: chi_vh {} vs finite difference {fd}", chi.chi_vh);
        worst = worst.max(err);
    }
    Ok(format!("10 configurations (5 per hidden space), max |err| {worst:.1e}"))
}

fn random_instance(hidden: HiddenSpace, n: usize, m: usize, seed: u64) -> Rbm {
    let mut rng = stream_rng(seed, 0);
    let (bias, weight) = (Normal::new(0.0, 0.3).unwrap(), Normal::new(0.0, 0.5).unwrap());
    let b = (0..n).map(|_| bias.sample(&mut rng)).collect();
    let c = (0..m).map(|_| bias.sample(&mut rng)).collect();
    let w = (0..n * m).map(|_| weight.sample(&mut rng)).collect();
    Rbm::from_parts(hidden, b, c, w).unwrap()
}

fn gradient_vs_finite_differences() -> Outcome {
    let mut worst = 0.0f64;
    for (k, hidden) in [HiddenSpace::Ising, HiddenSpace::Binary].into_iter().enumerate() {
        for seed in 0..3u64 {
            let rbm = random_instance(hidden, 6, 4, 100 + 10 * k as u64 + seed);
            let mut rng = stream_rng(seed, 1);
            let points = (0..25).map(|_| (0..6).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()).collect();
            let data = Dataset::new(points, "random").unwrap();
            let grad = exact_gradient(&rbm, &data).map_err(|e| e.to_string())?;
            let analytic: Vec<f64> = grad.db.iter().chain(&grad.dc).chain(&grad.dw).copied().collect();

            let ll = |rbm: &Rbm| exact_log_likelihood(rbm, &data).unwrap();
            let h = 1e-5;
            let mut numeric = Vec::new();
            for which in 0..3 {
                let len = [rbm.n, rbm.m, rbm.n * rbm.m][which];
                for i in 0..len {
                    let shifted = |delta: f64| {
                        let mut r = rbm.clone();
                        [&mut r.b, &mut r.c, &mut r.w][which][i] += delta;
                        ll(&r)
                    };
                    numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
                }
            }
            let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            let rel = diff / norm;
            ensure!(rel < 1e-5, "{hidden} seed {seed}: relative error {rel:.2e}");
            worst = worst.max(rel);
        }
    }
    Ok(format!("n=6 m=4, 3 instances per hidden space, max relative error {worst:.1e}"))
}

fn reference_instance(hidden: HiddenSpace) -> Rbm {
    let mut rng = stream_rng(12, 0);
    let (bias, weight) = (Normal::new(0.0, 0.2).unwrap(), Normal::new(0.0, 0.5).unwrap());
    let b = (0..12).map(|_| bias.sample(&mut rng)).collect();
    let c = (0..8).map(|_| bias.sample(&mut rng)).collect();
    let w = (0..96).map(|_| weight.sample(&mut rng)).collect();
    Rbm::from_parts(hidden, b, c, w).unwrap()
}

fn partition_oracles() -> Outcome {
    let mut enum_err = 0.0f64;
    for hidden in [HiddenSpace::Ising, HiddenSpace::Binary] {
        for (n, m) in [(4, 3), (8, 5), (10, 6)] {
            let rbm = random_instance(hidden, n, m, (n * m) as u64);
            let mut terms = Vec::with_capacity(1 << (n + m));
            for k in 0..1u64 << n {
                let v = visible_state(k, n);
                for l in 0..1usize << m {
                    let h: Vec<f64> = (0..m).map(|j| hidden.states()[l >> j & 1]).collect();
                    terms.push(-rbm.neg_log_unnorm(&v, &h).unwrap());
                }
            }
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let joint = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
            let visible = rbm.log_partition_exact().map_err(|e| e.to_string())?;
            ensure!((joint - visible).abs() < 1e-9, "{hidden} n={n} m={m}: {joint} vs {visible}");
            enum_err = enum_err.max((joint - visible).abs());
        }
    }

    let mut report = format!("enumeration max |err| {enum_err:.1e}");
    for hidden in [HiddenSpace::Binary, HiddenSpace::Ising] {
        let rbm = reference_instance(hidden);
        let exact = rbm.log_partition_exact().map_err(|e| e.to_string())?;
        let start = Instant::now();
        let estimates: Vec<f64> = (0..20u64)
            .map(|seed| mais_log_partition(&rbm, &MaisConfig { samples: 2000, schedule: 1000, seed }).map(|e| e.log_z))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let elapsed = start.elapsed().as_secs_f64();
        let worst = estimates.iter().map(|e| (e - exact).abs()).fold(0.0, f64::max);
        let mean = estimates.iter().sum::<f64>() / 20.0;
        let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
        ensure!(worst <= 0.05, "{hidden}: mAIS off by {worst:.4} nats");
        ensure!((mean - exact).abs() + 3.0 * sd <= 0.05, "{hidden}: |bias| + 3 sd = {:.4}", (mean - exact).abs() + 3.0 * sd);
        ensure!(elapsed < 120.0, "{hidden}: 20 mAIS runs took {elapsed:.0}s");
        report.push_str(&format!("; mAIS {hidden} max |err| {worst:.4}, 3sd {:.4}, {elapsed:.0}s", 3.0 * sd));
    }
    Ok(report)
}

fn toy_spec(data: Dataset, m: usize, seeds: usize) -> ExperimentSpec {
    ExperimentSpec {
        data,
        m,
        hidden: HiddenSpace::Ising,
        c: 0.0,
        multipliers: vec![0.25, 1.0, 4.0],
        seeds,
        base_seed: 0,
        train: TrainConfig { epochs: 200, mode: GradientMode::Exact, lr: 0.01, ..TrainConfig::default() },
        eval: EvalMode::Exact,
    }
}

fn toy_ordering() -> Outcome {
    let data = gen_toy(&ToySpec { seed: 0, ..Default::default() }).map_err(|e| e.to_string())?;
    let result = run_experiment(&toy_spec(data, 30, 10)).map_err(|e| e.to_string())?;
    let rows = result.at_epoch(200);
    let (quarter, at_max, four) = (rows[0].mean, rows[1].mean, rows[2].mean);
    let mut failures = Vec::new();
    if at_max - four < 0.5 {
        failures.push(format!("LL(beta_max) - LL(4 beta_max) = {:.3} < 0.5", at_max - four));
    }
    if (at_max + 9.27).abs() > 0.3 {
        failures.push(format!("LL(beta_max) = {at_max:.3} is not within 0.3 of -9.27"));
    }
    if at_max < quarter {
        failures.push(format!("LL(beta_max) = {at_max:.3} < LL(beta_max/4) = {quarter:.3}"));
    }

    // Smoke run on binarized digits, ordering only.
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/digits16.csv");
    let pixels = parse_real_csv(&fs::read_to_string(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let (digits, _) = binarize(&pixels, BinarizeMode::ElementWise, "digits16").map_err(|e| e.to_string())?;
    let points = digits.len();
    let smoke = run_experiment(&toy_spec(digits, 24, 3)).map_err(|e| e.to_string())?;
    for epoch in [50, 100, 200] {
        let r = smoke.at_epoch(epoch);
        if !(r[1].mean >= r[0].mean && r[1].mean >= r[2].mean) {
            failures.push(format!("digits epoch {epoch}: {:.3} / {:.3} / {:.3}", r[0].mean, r[1].mean, r[2].mean));
        }
    }
    let detail = format!(
        "toy LL at epoch 200: beta_max/4 {quarter:.3}, beta_max {at_max:.3}, 4 beta_max {four:.3}; digits ({points} points) beta_max best at 50/100/200"
    );
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

fn quadrature_properties() -> Outcome {
    let moments = [(0, 1.0), (1, 0.0), (2, 1.0), (3, 0.0), (4, 3.0), (6, 15.0), (8, 105.0)];
    let rules = [QuadratureRule::new(101).unwrap(), QuadratureRule::trapezoid(400).unwrap()];
    for rule in &rules {
        for (p, exact) in moments {
            let got = rule.integrate(|z| z.powi(p)).map_err(|e| e.to_string())?;
            ensure!((got - exact).abs() <= 1e-10 * exact.max(1.0), "order {} moment {p}: {got}", rule.order());
        }
    }
    let rule = QuadratureRule::default_rule();
    let mut worst = 0.0f64;
    for a in [-2.0, -0.5, 0.0, 0.3, 1.2] {
        for q in [0.01, 0.2, 1.0, 3.0, 25.0, 150.0] {
            let s: f64 = f64::sqrt(q);
            let rule = rule.for_slope(s);
            let lhs = rule.integrate(|z| z * (a + s * z).tanh()).map_err(|e| e.to_string())?;
            let rhs = s * rule.integrate(|z| 1.0 - (a + s * z).tanh().powi(2)).map_err(|e| e.to_string())?;
            ensure!((lhs - rhs).abs() < 1e-9, "a={a} q={q}: {lhs} vs {rhs}");
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(format!("moments to z^8 exact; partial integration max |err| {worst:.1e}"))
}

fn cli_determinism() -> Outcome {
    let cases: [(&[&str], &[&str]); 7] = [
        (&["beta-max", "--alpha", "1.5", "--c", "-2", "--hidden", "binary"], &[]),
        (&["gen-toy", "--seed", "7"], &["toy.csv"]),
        (&["init", "--n", "20", "--m", "30", "--hidden", "binary", "--c", "-1", "--seed", "7"], &["rbm.json"]),
        (&["beta-table", "--hidden", "ising"], &["beta_table.csv"]),
        (&["phase-scan", "--alpha", "1", "--c", "0", "--hidden", "binary", "--beta-max", "4"], &["phase_scan.csv"]),
        (
            &["train", "--n", "10", "--m", "6", "--epochs", "10", "--gradient", "pcd", "--chains", "50", "--eval", "mais", "--mais-samples", "20", "--mais-schedule", "20", "--seed", "7"],
            &["metrics.csv", "trained.json"],
        ),
        (
            &["experiment", "--n", "8", "--m", "5", "--hidden", "binary", "--c", "-1", "--multipliers", "0.5,1,2", "--seeds", "3", "--epochs", "5"],
            &["runs.csv", "summary.csv"],
        ),
    ];
    for (args, files) in cases {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let out = Command::new(env!("CARGO_BIN_EXE_rbminit"))
                .args(args)
                .env("RBMINIT_OUT", dir.path())
                .output()
                .map_err(|e| e.to_string())?;
            ensure!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
            // Printed paths differ between directories; compare what was written.
            let mut bytes = vec![if files.is_empty() { out.stdout } else { Vec::new() }];
            for file in files {
                bytes.push(fs::read(dir.path().join(file)).map_err(|e| e.to_string())?);
            }
            outputs.push(bytes);
        }
        ensure!(outputs[0] == outputs[1], "{args:?} differs between runs");
    }
    Ok(format!("{} commands repeated, outputs byte-identical", cases.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("binary beta_max table", binary_golden_table),
        ("ising beta_max table", ising_golden_table),
        ("trivial phase", trivial_phase),
        ("susceptibility vs finite differences", susceptibility_vs_finite_differences),
        ("gradient vs finite differences", gradient_vs_finite_differences),
        ("partition function oracles", partition_oracles),
        ("toy experiment ordering", toy_ordering),
        ("quadrature properties", quadrature_properties),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.0}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.0}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
