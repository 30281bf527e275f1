//! Likelihood ascent: exact or persistent-chain gradients with adam updates.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::{log_likelihood, mean_visible_log_unnorm, EvalMode};
use crate::exact::{model_statistics, ModelStatistics};
use crate::rbm::{check_len, Rbm};
use crate::rng::{stream_rng, StreamRng, CHAIN_STREAM, SHUFFLE_STREAM};

/// Log-likelihood gradient (ascent direction).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub db: Vec<f64>,
    pub dc: Vec<f64>,
    /// Row-major `n x m`.
    pub dw: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { db: vec![0.0; n], dc: vec![0.0; m], dw: vec![0.0; n * m] }
    }

    fn iter(&self) -> impl Iterator<Item = &f64> {
        self.db.iter().chain(&self.dc).chain(&self.dw)
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.db.iter_mut().chain(self.dc.iter_mut()).chain(self.dw.iter_mut())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

/// `<v>`, `<E[h|v]>` and `<v E[h|v]>` over a set of visible states, accumulated as a [`Gradient`].
fn visible_moments<'a>(rbm: &Rbm, states: impl Iterator<Item = &'a [f64]>) -> Gradient {
    let m = rbm.m;
    let mut acc = Gradient::zeros(rbm.n, m);
    let mut a = vec![0.0; m];
    let mut count = 0usize;
    for v in states {
        rbm.hidden_input_into(v, &mut a);
        a.iter_mut().for_each(|x| *x = rbm.hidden.mean(*x));
        acc.db.iter_mut().zip(v).for_each(|(d, v)| *d += v);
        acc.dc.iter_mut().zip(&a).for_each(|(d, h)| *d += h);
        for (i, &vi) in v.iter().enumerate() {
            acc.dw[i * m..(i + 1) * m].iter_mut().zip(&a).for_each(|(d, h)| *d += vi * h);
        }
        count += 1;
    }
    let inv = 1.0 / count.max(1) as f64;
    acc.iter_mut().for_each(|x| *x *= inv);
    acc
}

fn data_moments(rbm: &Rbm, batch: &Dataset) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_len(rbm.n, batch.n)?;
    Ok(visible_moments(rbm, batch.points.iter().map(Vec::as_slice)))
}

fn subtract_model(mut data: Gradient, model_v: &[f64], model_h: &[f64], model_vh: &[f64]) -> Gradient {
    data.db.iter_mut().zip(model_v).for_each(|(d, x)| *d -= x);
    data.dc.iter_mut().zip(model_h).for_each(|(d, x)| *d -= x);
    data.dw.iter_mut().zip(model_vh).for_each(|(d, x)| *d -= x);
    data
}

/// Data expectations minus exact model expectations.
pub fn exact_gradient(rbm: &Rbm, batch: &Dataset) -> Result<Gradient> {
    let stats = model_statistics(rbm)?;
    exact_gradient_with(rbm, batch, &stats)
}

fn exact_gradient_with(rbm: &Rbm, batch: &Dataset, stats: &ModelStatistics) -> Result<Gradient> {
    let data = data_moments(rbm, batch)?;
    Ok(subtract_model(data, &stats.mean_v, &stats.mean_h, &stats.mean_vh))
}

/// Persistent Gibbs chains; chain `k` owns random stream `CHAIN_STREAM + k`.
#[derive(Debug, Clone)]
pub struct PersistentChains {
    n: usize,
    /// Chain-major visible states, `chains x n`.
    states: Vec<f64>,
    rngs: Vec<StreamRng>,
}

impl PersistentChains {
    /// Uniformly random visible states, then `relaxation` sweeps under `rbm`.
    pub fn new(rbm: &Rbm, chains: usize, seed: u64, relaxation: usize) -> Result<Self> {
        rbm.validate()?;
        if chains == 0 {
            return Err(Error::Domain("need at least one chain".into()));
        }
        let mut rngs: Vec<StreamRng> = (0..chains as u64).map(|k| stream_rng(seed, CHAIN_STREAM + k)).collect();
        let states = rngs
            .iter_mut()
            .flat_map(|rng| (0..rbm.n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect::<Vec<_>>())
            .collect();
        let mut chains = Self { n: rbm.n, states, rngs };
        chains.advance(rbm, relaxation)?;
        Ok(chains)
    }

    pub fn len(&self) -> usize {
        self.rngs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rngs.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.n)
    }

    /// Advances every chain `sweeps` blocked Gibbs sweeps.
    pub fn advance(&mut self, rbm: &Rbm, sweeps: usize) -> Result<()> {
        check_len(self.n, rbm.n)?;
        if sweeps == 0 {
            return Ok(());
        }
        self.states.par_chunks_mut(self.n).zip(self.rngs.par_iter_mut()).for_each(|(v, rng)| {
            let mut h = vec![0.0; rbm.m];
            let mut scratch = vec![0.0; rbm.n.max(rbm.m)];
            for _ in 0..sweeps {
                rbm.gibbs_sweep_in_place(v, &mut h, &mut scratch, rng);
            }
        });
        Ok(())
    }

    /// Chain averages of `v`, `E[h|v]` and `v E[h|v]`.
    pub fn model_moments(&self, rbm: &Rbm) -> Gradient {
        visible_moments(rbm, self.states())
    }
}

/// Advances the chains `steps` sweeps, then returns data minus chain expectations.
pub fn pcd_gradient(rbm: &Rbm, batch: &Dataset, chains: &mut PersistentChains, steps: usize) -> Result<Gradient> {
    let data = data_moments(rbm, batch)?;
    chains.advance(rbm, steps)?;
    let model = chains.model_moments(rbm);
    Ok(subtract_model(data, &model.db, &model.dc, &model.dw))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub decay1: f64,
    pub decay2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, decay1: 0.9, decay2: 0.999, epsilon: 1e-8, step: 0, first: vec![0.0; len], second: vec![0.0; len] }
    }

    pub fn for_rbm(rbm: &Rbm, lr: f64) -> Self {
        Self::new(rbm.n + rbm.m + rbm.n * rbm.m, lr)
    }

    /// One bias-corrected ascent step on flat parameters.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        check_len(self.first.len(), params.len())?;
        check_len(self.first.len(), grad.len())?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        self.step += 1;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - self.decay1.powi(t), 1.0 - self.decay2.powi(t));
        for ((p, &g), (m, v)) in params.iter_mut().zip(grad).zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            *m = self.decay1 * *m + (1.0 - self.decay1) * g;
            *v = self.decay2 * *v + (1.0 - self.decay2) * g * g;
            *p += self.lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Applies one adam ascent step to the RBM's parameters.
pub fn adam_step(state: &mut AdamState, rbm: &mut Rbm, grad: &Gradient) -> Result<()> {
    check_len(rbm.n, grad.db.len())?;
    check_len(rbm.m, grad.dc.len())?;
    check_len(rbm.n * rbm.m, grad.dw.len())?;
    if !grad.is_finite() {
        return Err(Error::NonFiniteGradient);
    }
    let mut params: Vec<f64> = rbm.b.iter().chain(&rbm.c).chain(&rbm.w).copied().collect();
    let flat: Vec<f64> = grad.iter().copied().collect();
    state.update(&mut params, &flat)?;
    let (b, rest) = params.split_at(rbm.n);
    let (c, w) = rest.split_at(rbm.m);
    rbm.b.copy_from_slice(b);
    rbm.c.copy_from_slice(c);
    rbm.w.copy_from_slice(w);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Exact,
    Pcd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// `0` means full batch.
    pub batch_size: usize,
    pub mode: GradientMode,
    pub chains: usize,
    pub pcd_steps: usize,
    pub relaxation: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 200, batch_size: 0, mode: GradientMode::Exact, chains: 1000, pcd_steps: 40, relaxation: 500, lr: 0.01, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self, rbm: &Rbm) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Domain(format!("learning rate must be positive, got {}", self.lr)));
        }
        match self.mode {
            GradientMode::Exact if rbm.n > crate::rbm::ENUMERATION_CAP => {
                Err(Error::EnumerationCap { n: rbm.n, cap: crate::rbm::ENUMERATION_CAP })
            }
            GradientMode::Pcd if self.chains == 0 || self.pcd_steps == 0 => {
                Err(Error::Domain("PCD needs chains >= 1 and steps >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetric {
    pub epoch: usize,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub rbm: Rbm,
    /// Epoch 0 (the initial model) through `epochs`.
    pub metrics: Vec<EpochMetric>,
}

/// Metrics as `epoch,log_likelihood,beta_multiplier,seed` CSV.
pub fn metrics_csv(metrics: &[EpochMetric], beta_multiplier: f64, seed: u64) -> String {
    let mut out = String::from("epoch,log_likelihood,beta_multiplier,seed\n");
    for row in metrics {
        out.push_str(&format!("{},{},{},{}\n", row.epoch, row.log_likelihood, beta_multiplier, seed));
    }
    out
}

/// Trains `rbm` on `data`, evaluating the training log-likelihood after every
/// epoch with `eval`; `hook` sees each metric row and the current model.
pub fn train<F>(mut rbm: Rbm, data: &Dataset, config: &TrainConfig, eval: &EvalMode, mut hook: F) -> Result<TrainOutcome>
where
    F: FnMut(&EpochMetric, &Rbm),
{
    rbm.validate()?;
    config.validate(&rbm)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_len(rbm.n, data.n)?;

    let exact_eval = matches!(eval, EvalMode::Exact);
    let exact_grad = config.mode == GradientMode::Exact;
    // The exact statistics of the current model serve both the gradient and the evaluation.
    let mut cached: Option<ModelStatistics> = None;
    let evaluate = |rbm: &Rbm, cached: &mut Option<ModelStatistics>| -> Result<f64> {
        if exact_eval && exact_grad {
            let stats = model_statistics(rbm)?;
            let ll = mean_visible_log_unnorm(rbm, data)? - stats.log_z;
            *cached = Some(stats);
            Ok(ll)
        } else {
            log_likelihood(rbm, data, eval)
        }
    };

    let mut metrics = Vec::with_capacity(config.epochs + 1);
    let first = EpochMetric { epoch: 0, log_likelihood: evaluate(&rbm, &mut cached)? };
    hook(&first, &rbm);
    metrics.push(first);

    let mut chains = match config.mode {
        GradientMode::Pcd => Some(PersistentChains::new(&rbm, config.chains, config.seed, config.relaxation)?),
        GradientMode::Exact => None,
    };
    let mut adam = AdamState::for_rbm(&rbm, config.lr);
    let mut shuffle = stream_rng(config.seed, SHUFFLE_STREAM);
    let batch_size = if config.batch_size == 0 { data.len() } else { config.batch_size.min(data.len()) };
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=config.epochs {
        if batch_size < data.len() {
            order.shuffle(&mut shuffle);
        }
        for idx in order.chunks(batch_size) {
            let batch = if batch_size == data.len() { data.clone() } else { data.select(idx) };
            let grad = match chains.as_mut() {
                Some(chains) => pcd_gradient(&rbm, &batch, chains, config.pcd_steps)?,
                None => match cached.take() {
                    Some(stats) => exact_gradient_with(&rbm, &batch, &stats)?,
                    None => exact_gradient(&rbm, &batch)?,
                },
            };
            adam_step(&mut adam, &mut rbm, &grad)?;
        }
        let row = EpochMetric { epoch, log_likelihood: evaluate(&rbm, &mut cached)? };
        hook(&row, &rbm);
        metrics.push(row);
    }
    Ok(TrainOutcome { rbm, metrics })
}
