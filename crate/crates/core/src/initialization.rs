//! Dataset-free initialization: zero visible biases, constant hidden biases,
//! Gaussian weights with standard deviation `beta / sqrt(n + m)`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::meanfield::{find_beta_max, HiddenSpace, SearchConfig};
use crate::rbm::Rbm;
use crate::rng::{stream_rng, INIT_STREAM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub n: usize,
    pub m: usize,
    pub hidden: HiddenSpace,
    /// Hidden bias; must be `<= 0`, and exactly `0` for `{-1,1}` hidden units.
    pub c: f64,
    pub beta: f64,
    pub seed: u64,
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Domain("layer sizes must be positive".into()));
        }
        if !(self.c <= 0.0) {
            return Err(Error::Domain(format!("hidden bias must be <= 0, got {}", self.c)));
        }
        if self.hidden == HiddenSpace::Ising && self.c != 0.0 {
            return Err(Error::Domain("hidden bias must be 0 for {-1,1} hidden units".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be nonnegative, got {}", self.beta)));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.beta / ((self.n + self.m) as f64).sqrt()
    }
}

pub fn init_rbm(spec: &InitSpec) -> Result<Rbm> {
    spec.validate()?;
    let mut rbm = Rbm::zeros(spec.n, spec.m, spec.hidden);
    rbm.c.iter_mut().for_each(|c| *c = spec.c);
    if spec.beta > 0.0 {
        let sigma = spec.sigma();
        let mut rng = stream_rng(spec.seed, INIT_STREAM);
        rbm.w.iter_mut().for_each(|w| {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = sigma * z;
        });
    }
    Ok(rbm)
}

/// `beta_max` for `(alpha, c, hidden)` with `b = 0`, memoized at 1e-4 resolution.
pub fn cached_beta_max(alpha: f64, c: f64, hidden: HiddenSpace) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(i64, i64, HiddenSpace), f64>>> = OnceLock::new();
    let key = ((alpha * 1e4).round() as i64, (c * 1e4).round() as i64, hidden);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&beta) = cache.lock().unwrap().get(&key) {
        return Ok(beta);
    }
    let beta = find_beta_max(key.0 as f64 * 1e-4, 0.0, key.1 as f64 * 1e-4, hidden, &SearchConfig::default())?;
    cache.lock().unwrap().insert(key, beta);
    Ok(beta)
}

/// Initializes with `beta = beta_max(m / n, c, hidden)`; returns the RBM and the `beta` used.
pub fn dataset_free_init(n: usize, m: usize, hidden: HiddenSpace, c: f64, seed: u64) -> Result<(Rbm, f64)> {
    InitSpec { n, m, hidden, c, beta: 0.0, seed }.validate()?;
    let beta = cached_beta_max(m as f64 / n as f64, c, hidden)?;
    let rbm = init_rbm(&InitSpec { n, m, hidden, c, beta, seed })?;
    Ok((rbm, beta))
}
