//! Multiplier sweep: train from `k * beta_max` for each multiplier and seed,
//! then summarize the training log-likelihood per (multiplier, epoch).

use rayon::prelude::*;

use rbminit_core::datasets::Dataset;
use rbminit_core::error::{Error, Result};
use rbminit_core::evaluation::{EvalMode, MaisConfig};
use rbminit_core::initialization::{cached_beta_max, init_rbm, InitSpec};
use rbminit_core::meanfield::HiddenSpace;
use rbminit_core::training::{metrics_csv, train, EpochMetric, TrainConfig};

pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub data: Dataset,
    pub m: usize,
    pub hidden: HiddenSpace,
    pub c: f64,
    pub multipliers: Vec<f64>,
    pub seeds: usize,
    /// Run `s` uses seed `base_seed + s` for initialization, training and evaluation.
    pub base_seed: u64,
    /// Template; its `seed` is replaced per run.
    pub train: TrainConfig,
    pub eval: EvalMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub multiplier: f64,
    pub seed: u64,
    pub metrics: Vec<EpochMetric>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub multiplier: f64,
    pub beta: f64,
    pub epoch: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub beta_max: f64,
    pub runs: Vec<RunResult>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("epoch,log_likelihood,beta_multiplier,seed\n");
        for run in &self.runs {
            out.extend(metrics_csv(&run.metrics, run.multiplier, run.seed).lines().skip(1).map(|l| format!("{l}\n")));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("beta_multiplier,beta,epoch,mean_log_likelihood,std_log_likelihood\n");
        for r in &self.summary {
            out.push_str(&format!("{},{},{},{},{}\n", r.multiplier, r.beta, r.epoch, r.mean, r.std));
        }
        out
    }

    /// Summary rows at one epoch, in multiplier order.
    pub fn at_epoch(&self, epoch: usize) -> Vec<&SummaryRow> {
        self.summary.iter().filter(|r| r.epoch == epoch).collect()
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Domain("need at least one seed".into()));
        }
        if self.multipliers.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::Domain("beta multipliers must be positive".into()));
        }
        Ok(())
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let n = spec.data.n;
    let beta_max = cached_beta_max(spec.m as f64 / n as f64, spec.c, spec.hidden)?;
    let jobs: Vec<(f64, u64)> = spec
        .multipliers
        .iter()
        .flat_map(|&k| (0..spec.seeds as u64).map(move |s| (k, spec.base_seed + s)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(multiplier, seed)| {
            let rbm = init_rbm(&InitSpec { n, m: spec.m, hidden: spec.hidden, c: spec.c, beta: multiplier * beta_max, seed })?;
            let config = TrainConfig { seed, ..spec.train };
            let eval = match spec.eval {
                EvalMode::Mais(cfg) => EvalMode::Mais(MaisConfig { seed, ..cfg }),
                EvalMode::Exact => EvalMode::Exact,
            };
            let out = train(rbm, &spec.data, &config, &eval, |row, _| {
                log::debug!("k={multiplier} seed={seed} epoch={} ll={}", row.epoch, row.log_likelihood)
            })?;
            Ok(RunResult { multiplier, seed, metrics: out.metrics })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = Vec::new();
    for &k in &spec.multipliers {
        let group: Vec<&RunResult> = runs.iter().filter(|r| r.multiplier == k).collect();
        for epoch in 0..=spec.train.epochs {
            let values: Vec<f64> = group.iter().map(|r| r.metrics[epoch].log_likelihood).collect();
            let (mean, std) = mean_std(&values);
            summary.push(SummaryRow { multiplier: k, beta: k * beta_max, epoch, mean, std });
        }
    }
    Ok(ExperimentResult { beta_max, runs, summary })
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (mean, var.sqrt())
}
