//! Gauss-Hermite quadrature against the standard Gaussian measure `Dz`.
//!
//! Nodes and weights come from the Golub-Welsch eigen-decomposition of the
//! Jacobi matrix of the probabilists' Hermite polynomials, so the rule
//! integrates `exp(-z^2/2)/sqrt(2 pi)` directly (equivalent to the physicists'
//! rule with `z = sqrt(2) x` and `w / sqrt(pi)`).
//!
//! Mean-field integrands have the form `f(a + s z)` with `f` analytic in the
//! strip `|Im| < pi/2` (tanh, sigmoid, log-cosh). In `z` that strip narrows
//! to `pi / (2 s)`, and Gauss-Hermite accuracy decays like
//! `exp(-sqrt(2K) pi / (2 s))`. [`QuadratureRule::for_slope`] therefore
//! switches to a truncated trapezoid rule with step `~ 0.25 / s` beyond the
//! slope the Gauss-Hermite rule resolves; its error `~ exp(-pi^2 / 0.25)` does
//! not depend on `s`.

use std::collections::HashMap;
use std::ops::Deref;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default rule order used by every mean-field computation.
pub const DEFAULT_ORDER: usize = 101;

/// Trapezoid rules cover `[-TRAPEZOID_HALF_WIDTH, TRAPEZOID_HALF_WIDTH]`; the Gaussian tail beyond is ~1e-23.
pub const TRAPEZOID_HALF_WIDTH: f64 = 10.0;
/// Trapezoid step times slope.
const TRAPEZOID_STEP_SLOPE: f64 = 0.25;

/// A rule borrowed from its parent or shared from the trapezoid cache.
#[derive(Debug, Clone)]
pub enum RuleRef<'a> {
    Borrowed(&'a QuadratureRule),
    Shared(Arc<QuadratureRule>),
}

impl Deref for RuleRef<'_> {
    type Target = QuadratureRule;

    fn deref(&self) -> &QuadratureRule {
        match self {
            RuleRef::Borrowed(rule) => rule,
            RuleRef::Shared(rule) => rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds an `order`-point rule. Prefer [`QuadratureRule::cached`].
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("quadrature order must be positive".into()));
        }
        // Jacobi matrix for He_k: zero diagonal, off-diagonal sqrt(k).
        let jacobi = DMatrix::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Symmetrize: the eigen-solver leaves ~1e-15 asymmetry in the nodes.
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        for i in 0..order {
            let j = order - 1 - i;
            nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { nodes, weights })
    }

    /// Process-wide cache; each order is decomposed once.
    pub fn cached(order: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().unwrap().get(&order) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(Self::new(order)?);
        cache.lock().unwrap().insert(order, rule.clone());
        Ok(rule)
    }

    /// Trapezoid rule with `2 half_points + 1` equispaced nodes on
    /// `[-TRAPEZOID_HALF_WIDTH, TRAPEZOID_HALF_WIDTH]`, weights `h phi(z)` normalized to one.
    pub fn trapezoid(half_points: usize) -> Result<Self> {
        if half_points == 0 {
            return Err(Error::Domain("trapezoid rule needs at least one point per side".into()));
        }
        let h = TRAPEZOID_HALF_WIDTH / half_points as f64;
        let k = half_points as i64;
        let nodes: Vec<f64> = (-k..=k).map(|i| i as f64 * h).collect();
        let mut weights: Vec<f64> = nodes.iter().map(|z| (-0.5 * z * z).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { nodes, weights })
    }

    /// Largest slope `s` for which this Gauss-Hermite rule integrates
    /// strip-analytic `f(a + s z)` to ~1e-13 (1 at the default order).
    pub fn max_slope(&self) -> f64 {
        (self.order() as f64 / DEFAULT_ORDER as f64).sqrt()
    }

    /// The rule to use for integrands `f(a + slope z)`: this one up to
    /// [`max_slope`](Self::max_slope), a cached trapezoid rule beyond.
    pub fn for_slope(&self, slope: f64) -> RuleRef<'_> {
        if !(slope > self.max_slope()) {
            return RuleRef::Borrowed(self);
        }
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
        let half_points = (TRAPEZOID_HALF_WIDTH * slope.min(1e4) / TRAPEZOID_STEP_SLOPE).ceil() as usize;
        let cache = CACHE.get_or_init(Default::default);
        if let Some(rule) = cache.lock().unwrap().get(&half_points) {
            return RuleRef::Shared(rule.clone());
        }
        let rule = Arc::new(Self::trapezoid(half_points).expect("half_points >= 1"));
        cache.lock().unwrap().insert(half_points, rule.clone());
        RuleRef::Shared(rule)
    }

    pub fn default_rule() -> Arc<Self> {
        Self::cached(DEFAULT_ORDER).expect("default order is positive")
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_i w_i f(z_i)`, rejecting the first node where `f` is not finite.
    ///
    /// Mirror nodes are summed in pairs from the tails inwards, so odd
    /// integrands cancel exactly.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut checked = |z: f64| {
            let value = f(z);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::NodeEvaluation { node: z, value })
            }
        };
        let k = self.nodes.len();
        let mut acc = 0.0;
        for i in 0..k / 2 {
            let pair = checked(self.nodes[i])? + checked(self.nodes[k - 1 - i])?;
            acc += self.weights[i] * pair;
        }
        if k % 2 == 1 {
            acc += self.weights[k / 2] * checked(self.nodes[k / 2])?;
        }
        Ok(acc)
    }

    /// Unchecked variant for integrands that are bounded by construction.
    pub(crate) fn integrate_bounded<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let k = self.nodes.len();
        let mut acc = 0.0;
        for i in 0..k / 2 {
            acc += self.weights[i] * (f(self.nodes[i]) + f(self.nodes[k - 1 - i]));
        }
        if k % 2 == 1 {
            acc += self.weights[k / 2] * f(self.nodes[k / 2]);
        }
        acc
    }
}

/// Free-function form of [`QuadratureRule::integrate`].
pub fn gaussian_integrate<F: FnMut(f64) -> f64>(rule: &QuadratureRule, f: F) -> Result<f64> {
    rule.integrate(f)
}
