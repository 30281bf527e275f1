//! `rbminit` command line: beta_max lookup, phase scans, datasets, training and the multiplier sweep.

pub mod experiment;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use rbminit_core::datasets::{binarize, gen_toy, parse_real_csv, BinarizeMode, Dataset, ToySpec};
use rbminit_core::evaluation::{log_likelihood, mais_settings_discrepancy, EvalMode, MaisConfig};
use rbminit_core::initialization::{cached_beta_max, init_rbm, InitSpec};
use rbminit_core::meanfield::{find_beta_max, phase_scan, HiddenSpace, SearchConfig};
use rbminit_core::rbm::Rbm;
use rbminit_core::training::{metrics_csv, train, GradientMode, TrainConfig};

use experiment::{run_experiment, ExperimentSpec, DEFAULT_MULTIPLIERS};

#[derive(Debug, Parser)]
#[command(name = "rbminit", version, about = "Dataset-free RBM weight initialization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print beta_max for one (alpha, c) cell.
    BetaMax(BetaMaxArgs),
    /// beta_max over a grid of alphas and cs, as CSV.
    BetaTable(BetaTableArgs),
    /// |chi_vh| along a beta grid, as CSV.
    PhaseScan(PhaseScanArgs),
    /// Generate the four-pattern toy dataset.
    GenToy(GenToyArgs),
    /// Otsu-binarize a real-valued CSV.
    Binarize(BinarizeArgs),
    /// Write an initial RBM as JSON.
    Init(InitArgs),
    /// Train one RBM and write per-epoch metrics.
    Train(TrainArgs),
    /// Print the training log-likelihood of a model on a dataset.
    Eval(EvalArgs),
    /// Sweep beta multipliers x seeds and summarize.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "RBMINIT_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    /// Hidden-to-visible ratio m / n.
    #[arg(long, value_parser = positive)]
    pub alpha: f64,
    /// Hidden bias.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Visible bias.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long)]
    pub hidden: HiddenSpace,
}

#[derive(Debug, Args)]
pub struct BetaMaxArgs {
    #[command(flatten)]
    pub cell: CellArgs,
}

#[derive(Debug, Args)]
pub struct BetaTableArgs {
    #[arg(long)]
    pub hidden: HiddenSpace,
    /// Comma-separated alphas; defaults to 0.25..3 by 0.25 (binary) or 0.5..3 by 0.5 (ising).
    #[arg(long, value_delimiter = ',', num_args = 0.., value_parser = positive)]
    pub alphas: Option<Vec<f64>>,
    /// Comma-separated hidden biases; defaults to 0,-1,..,-6 (binary) or 0 (ising).
    #[arg(long, value_delimiter = ',', num_args = 0.., allow_negative_numbers = true)]
    pub cs: Option<Vec<f64>>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct PhaseScanArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    /// Upper end of the beta grid.
    #[arg(long = "beta-max", value_parser = positive)]
    pub beta_hi: f64,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub step: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GenToyArgs {
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub per_pattern: usize,
    #[arg(long, default_value_t = 0.15)]
    pub flip: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// One threshold per feature.
    Element,
    /// One threshold per sample.
    Point,
}

#[derive(Debug, Args)]
pub struct BinarizeArgs {
    /// Real-valued CSV, one sample per row (an optional header line is skipped).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "element")]
    pub mode: ModeArg,
    /// Keep only the first `limit` rows.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    #[arg(long)]
    pub hidden: HiddenSpace,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Weight scale; defaults to beta_max(m / n, c).
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GradientArg {
    Exact,
    Pcd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvalArg {
    Exact,
    Mais,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Mini-batch size; 0 is full batch.
    #[arg(long, default_value_t = 0)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub gradient: GradientArg,
    #[arg(long, default_value_t = 1000)]
    pub chains: usize,
    #[arg(long, default_value_t = 40)]
    pub pcd_steps: usize,
    #[arg(long, default_value_t = 500)]
    pub relaxation: usize,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub lr: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub eval: EvalArg,
    /// mAIS runs S.
    #[arg(long, default_value_t = 1000)]
    pub mais_samples: usize,
    /// mAIS intermediate distributions K.
    #[arg(long, default_value_t = 1000)]
    pub mais_schedule: usize,
}

impl TrainingArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            mode: match self.gradient {
                GradientArg::Exact => GradientMode::Exact,
                GradientArg::Pcd => GradientMode::Pcd,
            },
            chains: self.chains,
            pcd_steps: self.pcd_steps,
            relaxation: self.relaxation,
            lr: self.lr,
            seed,
        }
    }

    fn eval_mode(&self, seed: u64) -> EvalMode {
        match self.eval {
            EvalArg::Exact => EvalMode::Exact,
            EvalArg::Mais => EvalMode::Mais(MaisConfig { samples: self.mais_samples, schedule: self.mais_schedule, seed }),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset CSV of +-1 rows, or `toy`.
    #[arg(long, default_value = "toy")]
    pub data: String,
    /// Visible size of the generated toy dataset.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Start from this model instead of a fresh initialization.
    #[arg(long)]
    pub rbm: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub m: usize,
    #[arg(long, default_value = "ising")]
    pub hidden: HiddenSpace,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Initial weight scale as a multiple of beta_max.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub beta_multiplier: f64,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model JSON.
    #[arg(long)]
    pub rbm: PathBuf,
    /// Dataset CSV of +-1 rows.
    #[arg(long)]
    pub data: PathBuf,
    /// Exact partition function instead of mAIS.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1000)]
    pub schedule: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Compare the (S, K) setting against S = K = 10000 and fail on a relative
    /// log-likelihood discrepancy of 0.1% or more.
    #[arg(long, conflicts_with = "exact")]
    pub verify: bool,
}

/// Reference mAIS setting for `eval --verify`.
pub const VERIFY_REFERENCE: (usize, usize) = (10_000, 10_000);
/// Largest accepted relative discrepancy for `eval --verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Dataset CSV of +-1 rows, or `toy`.
    #[arg(long, default_value = "toy")]
    pub dataset: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub hidden: HiddenSpace,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long, value_delimiter = ',', value_parser = positive, default_values_t = DEFAULT_MULTIPLIERS)]
    pub multipliers: Vec<f64>,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Base seed; also seeds the generated toy dataset.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn load_dataset(spec: &str, toy_n: usize, seed: u64) -> anyhow::Result<Dataset> {
    if spec == "toy" {
        return Ok(gen_toy(&ToySpec { n: toy_n, seed, ..Default::default() })?);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    Ok(Dataset::from_csv(&text, spec)?)
}

fn default_grid(hidden: HiddenSpace) -> (Vec<f64>, Vec<f64>) {
    match hidden {
        HiddenSpace::Binary => ((1..=12).map(|k| 0.25 * k as f64).collect(), (0..=6).map(|k| 0.0 - k as f64).collect()),
        HiddenSpace::Ising => ((1..=6).map(|k| 0.5 * k as f64).collect(), vec![0.0]),
    }
}

/// Rows `alpha,c,beta_max`, with `NaN` where the search fails.
pub fn beta_table_csv(alphas: &[f64], cs: &[f64], hidden: HiddenSpace) -> String {
    let cells: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| cs.iter().map(move |&c| (a, c))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(a, c)| match find_beta_max(a, 0.0, c, hidden, &SearchConfig::default()) {
            Ok(beta) => beta,
            Err(e) => {
                log::warn!("alpha={a} c={c}: {e}");
                f64::NAN
            }
        })
        .collect();
    let mut out = String::from("alpha,c,beta_max\n");
    for ((a, c), beta) in cells.iter().zip(values) {
        // `+ 0.0` turns a `-0` bias into `0`.
        out.push_str(&format!("{a},{},{beta:.6}\n", c + 0.0));
    }
    out
}

/// Runs one command, writing human-facing output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::BetaMax(args) => {
            let CellArgs { alpha, c, b, hidden } = args.cell;
            let beta = find_beta_max(alpha, b, c, hidden, &SearchConfig::default())?;
            writeln!(stdout, "{beta:.4}")?;
        }
        Command::BetaTable(args) => {
            let (default_alphas, default_cs) = default_grid(args.hidden);
            let alphas = args.alphas.unwrap_or(default_alphas);
            let cs = args.cs.unwrap_or(default_cs);
            let path = write_file(&args.out.out, "beta_table.csv", &beta_table_csv(&alphas, &cs, args.hidden))?;
            writeln!(stdout, "{}", path.display())?;
        }
        Command::PhaseScan(args) => {
            let CellArgs { alpha, c, b, hidden } = args.cell;
            let count = (args.beta_hi / args.step + 1e-9).floor() as usize;
            if count == 0 {
                bail!("beta grid is empty: step {} exceeds {}", args.step, args.beta_hi);
            }
            let betas: Vec<f64> = (1..=count).map(|k| k as f64 * args.step).collect();
            let scan = phase_scan(alpha, b, c, hidden, &betas, &SearchConfig::default())?;
            let path = write_file(&args.out.out, "phase_scan.csv", &scan.to_csv())?;
            writeln!(stdout, "{}", path.display())?;
        }
        Command::GenToy(args) => {
            let data = gen_toy(&ToySpec { n: args.n, per_pattern: args.per_pattern, flip_prob: args.flip, seed: args.seed })?;
            let path = write_file(&args.out.out, "toy.csv", &data.to_csv())?;
            writeln!(stdout, "{}", path.display())?;
        }
        Command::Binarize(args) => {
            let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
            let mut rows = parse_real_csv(&text)?;
            if let Some(limit) = args.limit {
                rows.truncate(limit);
            }
            let mode = match args.mode {
                ModeArg::Element => BinarizeMode::ElementWise,
                ModeArg::Point => BinarizeMode::PointWise,
            };
            let (data, degenerate) = binarize(&rows, mode, args.input.display().to_string())?;
            if !degenerate.is_empty() {
                log::warn!("constant groups mapped to -1: {degenerate:?}");
            }
            let path = write_file(&args.out.out, "binarized.csv", &data.to_csv())?;
            writeln!(stdout, "{}", path.display())?;
        }
        Command::Init(args) => {
            let (n, m) = (args.n as usize, args.m as usize);
            let beta = match args.beta {
                Some(beta) => beta,
                None => cached_beta_max(m as f64 / n as f64, args.c, args.hidden)?,
            };
            let rbm = init_rbm(&InitSpec { n, m, hidden: args.hidden, c: args.c, beta, seed: args.seed })?;
            let path = write_file(&args.out.out, "rbm.json", &rbm.to_json()?)?;
            writeln!(stdout, "{beta:.6} {}", path.display())?;
        }
        Command::Train(args) => {
            let data = load_dataset(&args.data, args.n, args.seed)?;
            let (rbm, multiplier) = match &args.rbm {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    (Rbm::from_json(&text)?, f64::NAN)
                }
                None => {
                    let beta = args.beta_multiplier * cached_beta_max(args.m as f64 / data.n as f64, args.c, args.hidden)?;
                    let spec = InitSpec { n: data.n, m: args.m, hidden: args.hidden, c: args.c, beta, seed: args.seed };
                    (init_rbm(&spec)?, args.beta_multiplier)
                }
            };
            let config = args.training.config(args.seed);
            let out = train(rbm, &data, &config, &args.training.eval_mode(args.seed), |row, _| {
                log::info!("epoch {} log-likelihood {}", row.epoch, row.log_likelihood)
            })?;
            write_file(&args.out.out, "trained.json", &out.rbm.to_json()?)?;
            let path = write_file(&args.out.out, "metrics.csv", &metrics_csv(&out.metrics, multiplier, args.seed))?;
            writeln!(stdout, "{}", path.display())?;
        }
        Command::Eval(args) => {
            let rbm = Rbm::from_json(&fs::read_to_string(&args.rbm).with_context(|| format!("reading {}", args.rbm.display()))?)?;
            let text = fs::read_to_string(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
            let data = Dataset::from_csv(&text, args.data.display().to_string())?;
            if args.verify {
                let production = MaisConfig { samples: args.samples, schedule: args.schedule, seed: args.seed };
                let (samples, schedule) = VERIFY_REFERENCE;
                let reference = MaisConfig { samples, schedule, seed: args.seed };
                let gap = mais_settings_discrepancy(&rbm, &data, &production, &reference)?;
                writeln!(stdout, "relative discrepancy {gap:.3e}")?;
                if gap >= VERIFY_TOLERANCE {
                    bail!("mAIS setting S={} K={} is off by {gap:.3e} (limit {VERIFY_TOLERANCE})", args.samples, args.schedule);
                }
                return Ok(());
            }
            let mode = if args.exact {
                EvalMode::Exact
            } else {
                EvalMode::Mais(MaisConfig { samples: args.samples, schedule: args.schedule, seed: args.seed })
            };
            writeln!(stdout, "{}", log_likelihood(&rbm, &data, &mode)?)?;
        }
        Command::Experiment(args) => {
            let data = load_dataset(&args.dataset, args.n, args.seed)?;
            let spec = ExperimentSpec {
                data,
                m: args.m,
                hidden: args.hidden,
                c: args.c,
                multipliers: args.multipliers.clone(),
                seeds: args.seeds as usize,
                base_seed: args.seed,
                train: args.training.config(args.seed),
                eval: args.training.eval_mode(args.seed),
            };
            let result = run_experiment(&spec)?;
            write_file(&args.out.out, "runs.csv", &result.runs_csv())?;
            write_file(&args.out.out, "summary.csv", &result.summary_csv())?;
            writeln!(stdout, "beta_max = {:.4}", result.beta_max)?;
            writeln!(stdout, "epoch {}: multiplier  mean  std", args.training.epochs)?;
            for row in result.at_epoch(args.training.epochs) {
                writeln!(stdout, "{:>6} {:>10.4} {:>8.4}", row.multiplier, row.mean, row.std)?;
            }
        }
    }
    Ok(())
}
