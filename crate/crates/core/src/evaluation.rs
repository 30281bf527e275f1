//! Training log-likelihood: exact at desk scale, annealed importance sampling beyond.

use rayon::prelude::*;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::meanfield::log_two_cosh;
use crate::rbm::{check_len, sigmoid, Rbm};
use crate::rng::stream_rng;
use rand::Rng;

/// Mean of `visible_log_unnorm` over the data.
pub fn mean_visible_log_unnorm(rbm: &Rbm, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_len(rbm.n, data.n)?;
    Ok(data.points.iter().map(|v| rbm.visible_log_unnorm_unchecked(v)).sum::<f64>() / data.len() as f64)
}

/// `(1/N) sum_mu ln P(v_mu)` with the exact partition function.
pub fn exact_log_likelihood(rbm: &Rbm, data: &Dataset) -> Result<f64> {
    let log_z = rbm.log_partition_exact()?;
    Ok(mean_visible_log_unnorm(rbm, data)? - log_z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaisConfig {
    /// Number of independent annealing runs `S`.
    pub samples: usize,
    /// Number of intermediate distributions `K`.
    pub schedule: usize,
    pub seed: u64,
}

impl MaisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.schedule == 0 {
            return Err(Error::Domain("mAIS needs S >= 1 and K >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaisEstimate {
    pub log_z: f64,
    /// Jackknife standard error of `log_z` (NaN for a single run).
    pub std_error: f64,
    pub log_weights: Vec<f64>,
}

/// Log partition function of the `w = 0`, `c = 0` base model.
pub fn base_log_partition(rbm: &Rbm) -> f64 {
    rbm.b.iter().map(|&b| log_two_cosh(b)).sum::<f64>() + rbm.m as f64 * std::f64::consts::LN_2
}

/// AIS on the hidden-marginalized visible distribution.
///
/// The `k`-th target is `exp(b.v + sum_j g(t_k a_j(v)))` with `t_k = k / K`,
/// i.e. `(w, c)` scaled linearly from zero while `b` stays fixed. Run `s` uses
/// random stream `s` of the seed.
pub fn mais_log_partition(rbm: &Rbm, config: &MaisConfig) -> Result<MaisEstimate> {
    config.validate()?;
    rbm.validate()?;
    let log_weights: Vec<f64> = (0..config.samples)
        .into_par_iter()
        .map(|s| annealing_run(rbm, config, s as u64))
        .collect();
    let (estimate, std_error) = log_mean_exp_jackknife(&log_weights);
    Ok(MaisEstimate { log_z: base_log_partition(rbm) + estimate, std_error, log_weights })
}

fn annealing_run(rbm: &Rbm, config: &MaisConfig, stream: u64) -> f64 {
    let (n, m) = (rbm.n, rbm.m);
    let mut rng = stream_rng(config.seed, stream);
    let mut v: Vec<f64> = rbm
        .b
        .iter()
        .map(|&b| if rng.gen::<f64>() < sigmoid(2.0 * b) { 1.0 } else { -1.0 })
        .collect();
    let mut a = vec![0.0; m];
    let mut h = vec![0.0; m];
    let mut x = vec![0.0; n];
    let off = rbm.hidden.off_value();
    let k_total = config.schedule as f64;
    let mut log_w = 0.0;
    for k in 1..=config.schedule {
        let (prev, cur) = ((k - 1) as f64 / k_total, k as f64 / k_total);
        rbm.hidden_input_into(&v, &mut a);
        log_w += a
            .iter()
            .map(|&aj| rbm.hidden.log_partition(cur * aj) - rbm.hidden.log_partition(prev * aj))
            .sum::<f64>();
        if k == config.schedule {
            break;
        }
        // One blocked Gibbs sweep at inverse temperature `cur`.
        for (hj, &aj) in h.iter_mut().zip(&a) {
            *hj = if rng.gen::<f64>() < rbm.hidden.on_probability(cur * aj) { 1.0 } else { off };
        }
        for (i, xi) in x.iter_mut().enumerate() {
            let row = &rbm.w[i * m..(i + 1) * m];
            *xi = rbm.b[i] + cur * row.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>();
        }
        for (vi, &xi) in v.iter_mut().zip(&x) {
            *vi = if rng.gen::<f64>() < sigmoid(2.0 * xi) { 1.0 } else { -1.0 };
        }
    }
    log_w
}

/// `ln mean exp(x)` and its leave-one-out jackknife standard error.
pub fn log_mean_exp_jackknife(xs: &[f64]) -> (f64, f64) {
    let s = xs.len();
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = scaled.iter().sum();
    let estimate = max + (total / s as f64).ln();
    if s < 2 {
        return (estimate, f64::NAN);
    }
    let loo: Vec<f64> = scaled
        .iter()
        .map(|&w| max + ((total - w).max(f64::MIN_POSITIVE) / (s - 1) as f64).ln())
        .collect();
    let mean = loo.iter().sum::<f64>() / s as f64;
    let var = loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (s - 1) as f64 / s as f64;
    (estimate, var.sqrt())
}

/// Log-likelihood with an mAIS partition estimate.
pub fn mais_log_likelihood(rbm: &Rbm, data: &Dataset, config: &MaisConfig) -> Result<f64> {
    let estimate = mais_log_partition(rbm, config)?;
    Ok(mean_visible_log_unnorm(rbm, data)? - estimate.log_z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact,
    Mais(MaisConfig),
}

pub fn log_likelihood(rbm: &Rbm, data: &Dataset, mode: &EvalMode) -> Result<f64> {
    match mode {
        EvalMode::Exact => exact_log_likelihood(rbm, data),
        EvalMode::Mais(config) => mais_log_likelihood(rbm, data, config),
    }
}

/// Relative log-likelihood discrepancy between a production mAIS setting and
/// a reference one, `|LL_prod - LL_ref| / |LL_ref|`.
pub fn mais_settings_discrepancy(rbm: &Rbm, data: &Dataset, production: &MaisConfig, reference: &MaisConfig) -> Result<f64> {
    let prod = mais_log_likelihood(rbm, data, production)?;
    let reference = mais_log_likelihood(rbm, data, reference)?;
    Ok((prod - reference).abs() / reference.abs())
}
