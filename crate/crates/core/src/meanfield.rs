//! Replica-symmetric mean-field analysis of the initial RBM.
//!
//! The initial RBM has uniform biases `b`, `c` and i.i.d. Gaussian weights
//! with standard deviation `beta / sqrt(n + m)`. In the large-size limit with
//! `alpha = m / n` fixed, its disorder-averaged free energy is governed by two
//! order parameters `(q_v, q_h)` and two auxiliary parameters
//! `(qhat_v, qhat_h)`. This module solves for them, evaluates the free energy
//! and the 2x2 susceptibility matrix, and searches for the `beta` that
//! maximizes the layer correlation `|chi_vh|`.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Sample space of the hidden units. Visible units are always `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenSpace {
    /// `h in {-1, +1}`
    Ising,
    /// `h in {0, 1}`
    Binary,
}

impl HiddenSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            HiddenSpace::Ising => "ising",
            HiddenSpace::Binary => "binary",
        }
    }

    /// The two values a hidden unit can take.
    pub fn states(self) -> [f64; 2] {
        match self {
            HiddenSpace::Ising => [-1.0, 1.0],
            HiddenSpace::Binary => [0.0, 1.0],
        }
    }
}

impl fmt::Display for HiddenSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HiddenSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ising" => Ok(HiddenSpace::Ising),
            "binary" => Ok(HiddenSpace::Binary),
            other => Err(Error::Parse(format!("unknown hidden space `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Visible,
    Hidden,
}

/// One mean-field problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Layer ratio `m / n`.
    pub alpha: f64,
    /// Uniform visible bias.
    pub b: f64,
    /// Uniform hidden bias.
    pub c: f64,
    pub hidden: HiddenSpace,
    /// Scale of the weight prior.
    pub beta: f64,
}

impl ModelConfig {
    pub fn new(alpha: f64, b: f64, c: f64, hidden: HiddenSpace, beta: f64) -> Result<Self> {
        let config = Self { alpha, b, c, hidden, beta };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if !self.b.is_finite() || !self.c.is_finite() {
            return Err(Error::Domain("biases must be finite".into()));
        }
        Ok(())
    }

    /// `beta^2 T_alpha`, the linear map from `(q_v, q_h)` to `(qhat_v, qhat_h)`.
    pub fn coupling(&self) -> Matrix2<f64> {
        self.beta * self.beta * t_alpha(self.alpha)
    }

    /// `beta^2 / (2 (1 + alpha))`, the self-coupling shift a `{0,1}` hidden unit sees.
    fn binary_shift(&self) -> f64 {
        self.beta * self.beta / (2.0 * (1.0 + self.alpha))
    }
}

/// Off-diagonal mixing matrix `T_alpha = [[0, alpha], [1, 0]] / (1 + alpha)`.
pub fn t_alpha(alpha: f64) -> Matrix2<f64> {
    Matrix2::new(0.0, alpha, 1.0, 0.0) / (1.0 + alpha)
}

/// Diagonal layer-weight matrix `diag(1, alpha) / (1 + alpha)`; its diagonal is `tau_l / (1 + alpha)`.
pub fn t_hat_alpha(alpha: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, 0.0, 0.0, alpha) / (1.0 + alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddlePoint {
    pub q_v: f64,
    pub q_h: f64,
    pub qhat_v: f64,
    pub qhat_h: f64,
    /// Max-norm of `G(q) - q` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

impl SaddlePoint {
    fn from_order(config: &ModelConfig, q: Vector2<f64>, residual: f64, iterations: usize) -> Self {
        let qhat = config.coupling() * q;
        Self {
            q_v: q[0],
            q_h: q[1],
            qhat_v: qhat[0].max(0.0),
            qhat_h: qhat[1].max(0.0),
            residual,
            iterations,
        }
    }

    /// The all-zero saddle with no iterations.
    pub fn zero() -> Self {
        Self { q_v: 0.0, q_h: 0.0, qhat_v: 0.0, qhat_h: 0.0, residual: 0.0, iterations: 0 }
    }

    pub fn max_component(&self) -> f64 {
        self.q_v.abs().max(self.q_h.abs()).max(self.qhat_v.abs()).max(self.qhat_h.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Starting value for both order parameters.
    pub initial: f64,
    /// Residual below which Newton steps on `G(q) = q` are attempted.
    pub newton_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-12,
            max_iterations: 50_000,
            initial: 0.999,
            newton_threshold: 1e-3,
        }
    }
}

/// `E_l^(r)(z)`: the `r`-th conditional moment of a single unit of layer `l`
/// under the effective single-site energy at Gaussian field `z`.
pub fn conditional_moment(config: &ModelConfig, layer: Layer, saddle: &SaddlePoint, z: f64, r: u8) -> f64 {
    let (first, second) = moments_at(config, layer, saddle.qhat_v, saddle.qhat_h, z);
    match r {
        1 => first,
        _ => second,
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(2 cosh x)` without overflow.
#[inline]
pub(crate) fn log_two_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// `(E^(1), E^(2))` for one layer; `E^(2) = 1` for `{-1,1}` units and `E^(2) = E^(1)` for `{0,1}` units.
#[inline]
fn moments_at(config: &ModelConfig, layer: Layer, qhat_v: f64, qhat_h: f64, z: f64) -> (f64, f64) {
    match (layer, config.hidden) {
        (Layer::Visible, _) => ((config.b + z * qhat_v.sqrt()).tanh(), 1.0),
        (Layer::Hidden, HiddenSpace::Ising) => ((config.c + z * qhat_h.sqrt()).tanh(), 1.0),
        (Layer::Hidden, HiddenSpace::Binary) => {
            let s = sigmoid(config.c + config.binary_shift() - 0.5 * qhat_h + z * qhat_h.sqrt());
            (s, s)
        }
    }
}

/// Gaussian averages of the moment combinations entering the susceptibility.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LayerMoments {
    /// `int Dz E1^2`, the right-hand side of the order-parameter equation.
    pub q: f64,
    /// `int Dz (E2 - E1^2)`
    pub v: f64,
    /// `int Dz E1 (E2 - E1^2)`
    pub u: f64,
    /// `int Dz (E2^2 - 4 E2 E1^2 + 3 E1^4)`; also `d q / d qhat`.
    pub w: f64,
}

/// Slope of the Gaussian field entering layer `l`'s integrands.
#[inline]
fn slope(layer: Layer, qhat_v: f64, qhat_h: f64) -> f64 {
    match layer {
        Layer::Visible => qhat_v.sqrt(),
        Layer::Hidden => qhat_h.sqrt(),
    }
}

fn layer_moments(rule: &QuadratureRule, config: &ModelConfig, layer: Layer, qhat_v: f64, qhat_h: f64) -> LayerMoments {
    let rule = rule.for_slope(slope(layer, qhat_v, qhat_h));
    let mut acc = LayerMoments::default();
    for (&z, &wt) in rule.nodes().iter().zip(rule.weights()) {
        let (e1, e2) = moments_at(config, layer, qhat_v, qhat_h, z);
        let e1sq = e1 * e1;
        let var = e2 - e1sq;
        acc.q += wt * e1sq;
        acc.v += wt * var;
        acc.u += wt * e1 * var;
        acc.w += wt * (e2 * e2 - 4.0 * e2 * e1sq + 3.0 * e1sq * e1sq);
    }
    acc
}

/// Right-hand side of the order-parameter equations and its Jacobian diagonal.
fn saddle_map(rule: &QuadratureRule, config: &ModelConfig, q: Vector2<f64>) -> (Vector2<f64>, Vector2<f64>) {
    let qhat = config.coupling() * q;
    let (qhv, qhh) = (qhat[0].max(0.0), qhat[1].max(0.0));
    let mv = layer_moments(rule, config, Layer::Visible, qhv, qhh);
    let mh = layer_moments(rule, config, Layer::Hidden, qhv, qhh);
    (Vector2::new(mv.q, mh.q), Vector2::new(mv.w, mh.w))
}

/// Solves the saddle-point equations with the default solver settings.
pub fn solve_saddle_point(config: &ModelConfig, rule: &QuadratureRule) -> Result<SaddlePoint> {
    solve_saddle_point_with(config, rule, &SolverConfig::default())
}

/// Damped successive substitution on `q <- G(q)` started near `q = 1`, so
/// that the nontrivial branch is selected whenever it exists. Once the
/// residual is small, Newton steps with the analytic Jacobian
/// `dG/dq = diag(W) beta^2 T_alpha` are tried and kept only if they reduce the
/// residual; this removes the critical slowing down near the transition.
pub fn solve_saddle_point_with(config: &ModelConfig, rule: &QuadratureRule, solver: &SolverConfig) -> Result<SaddlePoint> {
    config.validate()?;
    if config.beta == 0.0 {
        let (g, _) = saddle_map(rule, config, Vector2::zeros());
        return Ok(SaddlePoint::from_order(config, g, 0.0, 1));
    }
    let coupling = config.coupling();
    let residual_of = |q: Vector2<f64>| {
        let (g, w) = saddle_map(rule, config, q);
        (g, w, (g - q).amax())
    };

    let mut q = Vector2::repeat(solver.initial);
    let (mut g, mut w, mut residual) = residual_of(q);
    for iteration in 1..=solver.max_iterations {
        if residual <= solver.tolerance {
            return Ok(SaddlePoint::from_order(config, q, residual, iteration - 1));
        }
        if residual < solver.newton_threshold {
            let jacobian = Matrix2::from_diagonal(&w) * coupling;
            if let Some(inv) = (Matrix2::identity() - jacobian).try_inverse() {
                let candidate = q + inv * (g - q);
                if candidate.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)) {
                    let (cg, cw, cr) = residual_of(candidate);
                    if cr < residual {
                        q = candidate;
                        (g, w, residual) = (cg, cw, cr);
                        continue;
                    }
                }
            }
        }
        q = q * (1.0 - solver.damping) + g * solver.damping;
        (g, w, residual) = residual_of(q);
    }
    if residual <= solver.tolerance {
        return Ok(SaddlePoint::from_order(config, q, residual, solver.max_iterations));
    }
    Err(Error::NonConvergence {
        iterations: solver.max_iterations,
        residual,
        q_v: q[0],
        q_h: q[1],
        beta: Some(config.beta),
    })
}

/// Max-norm distance between a saddle point and one application of the saddle map.
pub fn saddle_consistency(config: &ModelConfig, saddle: &SaddlePoint, rule: &QuadratureRule) -> f64 {
    let q = Vector2::new(saddle.q_v, saddle.q_h);
    let (g, _) = saddle_map(rule, config, q);
    let qhat = config.coupling() * q;
    (g - q)
        .amax()
        .max((qhat[0] - saddle.qhat_v).abs())
        .max((qhat[1] - saddle.qhat_h).abs())
}

/// Replica-symmetric free energy per unit at the given saddle point.
pub fn free_energy(config: &ModelConfig, saddle: &SaddlePoint, rule: &QuadratureRule) -> f64 {
    let a = config.alpha;
    let beta2 = config.beta * config.beta;
    let (qv, qh, qhv, qhh) = (saddle.q_v, saddle.q_h, saddle.qhat_v, saddle.qhat_h);
    let visible = rule.for_slope(qhv.sqrt()).integrate_bounded(|z| log_two_cosh(config.b + z * qhv.sqrt()));
    let self_coupling = 0.5 * (beta2 / (1.0 + a) - qhh);
    let hidden = rule.for_slope(qhh.sqrt()).integrate_bounded(|z| {
        let field = config.c + z * qhh.sqrt();
        match config.hidden {
            HiddenSpace::Ising => log_two_cosh(field) + self_coupling,
            HiddenSpace::Binary => softplus(field + self_coupling),
        }
    });
    a * beta2 / (2.0 * (1.0 + a).powi(2)) * qv * qh
        - qhv * (qv - 1.0) / (2.0 * (1.0 + a))
        - a * qhh * qh / (2.0 * (1.0 + a))
        - visible / (1.0 + a)
        - a * hidden / (1.0 + a)
}

/// Layer magnetizations `(M_v, M_h) = (-df/db, -df/dc)`.
pub fn magnetizations(config: &ModelConfig, saddle: &SaddlePoint, rule: &QuadratureRule) -> (f64, f64) {
    let a = config.alpha;
    let (qv, qh) = (saddle.qhat_v, saddle.qhat_h);
    let mv = rule.for_slope(qv.sqrt()).integrate_bounded(|z| moments_at(config, Layer::Visible, qv, qh, z).0);
    let mh = rule.for_slope(qh.sqrt()).integrate_bounded(|z| moments_at(config, Layer::Hidden, qv, qh, z).0);
    (mv / (1.0 + a), a * mh / (1.0 + a))
}

/// Spin-glass transition point of the zero-bias `{-1,1}` model:
/// `beta_c^2 = sqrt(alpha) + 1 / sqrt(alpha)`.
pub fn beta_critical(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let s = alpha.sqrt();
    Ok((s + 1.0 / s).sqrt())
}

/// Response of the layer magnetizations to the biases, `chi_{l,k} = dM_l / dd_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityMatrix {
    pub chi_vv: f64,
    pub chi_vh: f64,
    pub chi_hv: f64,
    pub chi_hh: f64,
    /// `tau_l / (1 + alpha)` for `l = v, h`.
    pub tau: [f64; 2],
    pub visible: LayerMoments,
    pub hidden: LayerMoments,
    /// `det(I - beta^2 W T_alpha)`.
    pub det: f64,
}

impl SusceptibilityMatrix {
    pub fn as_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.chi_vv, self.chi_vh, self.chi_hv, self.chi_hh)
    }
}

/// Below this `|det(I - beta^2 W T_alpha)|` the susceptibility is treated as divergent.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// `chi = T_hat {V - 2 beta^2 U T (I - beta^2 W T)^-1 U}` with diagonal `V`, `U`, `W`.
pub fn susceptibility(config: &ModelConfig, saddle: &SaddlePoint, rule: &QuadratureRule) -> Result<SusceptibilityMatrix> {
    let visible = layer_moments(rule, config, Layer::Visible, saddle.qhat_v, saddle.qhat_h);
    let hidden = layer_moments(rule, config, Layer::Hidden, saddle.qhat_v, saddle.qhat_h);
    let beta2 = config.beta * config.beta;
    let t = t_alpha(config.alpha);
    let t_hat = t_hat_alpha(config.alpha);
    let v = Matrix2::new(visible.v, 0.0, 0.0, hidden.v);
    let u = Matrix2::new(visible.u, 0.0, 0.0, hidden.u);
    let w = Matrix2::new(visible.w, 0.0, 0.0, hidden.w);

    let a = Matrix2::identity() - beta2 * w * t;
    let det = a.determinant();
    if !det.is_finite() || det.abs() < SINGULARITY_THRESHOLD {
        return Err(Error::SingularSusceptibility { det });
    }
    // Closed-form 2x2 inverse.
    let a_inv = Matrix2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det;
    let chi = t_hat * (v - 2.0 * beta2 * u * t * a_inv * u);
    Ok(SusceptibilityMatrix {
        chi_vv: chi[(0, 0)],
        chi_vh: chi[(0, 1)],
        chi_hv: chi[(1, 0)],
        chi_hh: chi[(1, 1)],
        tau: [t_hat[(0, 0)], t_hat[(1, 1)]],
        visible,
        hidden,
        det,
    })
}

/// Settings for the `beta_max` search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Upper end of the scan; `None` means `2 (1 + beta_c(alpha) + |c|)`.
    pub beta_hi: Option<f64>,
    pub grid_step: f64,
    /// Bracket width at which golden-section refinement stops.
    pub tolerance: f64,
    /// Stand-in for biases that make `chi_vh` vanish identically by symmetry.
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub quadrature_order: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            beta_hi: None,
            grid_step: 0.01,
            tolerance: 1e-4,
            epsilon: 1e-3,
            solver: SolverConfig::default(),
            quadrature_order: crate::quadrature::DEFAULT_ORDER,
        }
    }
}

impl SearchConfig {
    pub fn beta_hi_for(&self, alpha: f64, c: f64) -> Result<f64> {
        match self.beta_hi {
            Some(hi) if hi > 0.0 => Ok(hi),
            Some(hi) => Err(Error::Domain(format!("beta_hi must be positive, got {hi}"))),
            None => Ok(2.0 * (1.0 + beta_critical(alpha)? + c.abs())),
        }
    }

    /// `chi_vh` is odd in `b` (and, for `{-1,1}` hidden units, odd in `c`), so
    /// at an exactly zero bias it vanishes for every `beta`. The meaningful
    /// curve is the limit from positive bias, evaluated at `epsilon`.
    pub fn regularize(&self, b: f64, c: f64, hidden: HiddenSpace) -> (f64, f64) {
        let b = if b == 0.0 { self.epsilon } else { b };
        let c = if c == 0.0 && hidden == HiddenSpace::Ising { self.epsilon } else { c };
        (b, c)
    }
}

/// `|chi_vh|` at one `beta`, or `None` when the susceptibility is singular there.
pub fn abs_layer_correlation(config: &ModelConfig, rule: &QuadratureRule, solver: &SolverConfig) -> Result<Option<f64>> {
    let saddle = solve_saddle_point_with(config, rule, solver)?;
    match susceptibility(config, &saddle, rule) {
        Ok(chi) => Ok(Some(chi.chi_vh.abs())),
        Err(Error::SingularSusceptibility { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `|chi_vh|` over a `beta` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScan {
    pub betas: Vec<f64>,
    /// Singular points carry the largest finite neighbouring value.
    pub abs_chi_vh: Vec<f64>,
    pub singular: Vec<bool>,
    pub argmax_beta: f64,
}

impl PhaseScan {
    pub fn argmax_index(&self) -> usize {
        self.betas.iter().position(|&b| b == self.argmax_beta).unwrap_or(0)
    }

    /// CSV with header `beta,abs_chi_vh`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,abs_chi_vh\n");
        for (beta, chi) in self.betas.iter().zip(&self.abs_chi_vh) {
            out.push_str(&format!("{beta},{chi:e}\n"));
        }
        out
    }

    /// Number of sign changes of the discrete differences, ignoring ties
    /// below `tie` in magnitude. A unimodal curve gives at most one.
    pub fn sign_changes(&self, tie: f64) -> usize {
        let signs: Vec<f64> = self
            .abs_chi_vh
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| d.abs() > tie)
            .map(f64::signum)
            .collect();
        signs.windows(2).filter(|s| s[0] != s[1]).count()
    }
}

/// Evaluates `|chi_vh|` at every grid point (in parallel, assembled in order).
pub fn phase_scan(alpha: f64, b: f64, c: f64, hidden: HiddenSpace, betas: &[f64], search: &SearchConfig) -> Result<PhaseScan> {
    if betas.is_empty() {
        return Err(Error::Domain("beta grid is empty".into()));
    }
    if betas.iter().any(|&x| !(x > 0.0 && x.is_finite())) || betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("beta grid must be positive and strictly increasing".into()));
    }
    beta_critical(alpha)?;
    let (b, c) = search.regularize(b, c, hidden);
    let rule = QuadratureRule::cached(search.quadrature_order)?;
    let values: Vec<Option<f64>> = betas
        .par_iter()
        .map(|&beta| {
            let config = ModelConfig::new(alpha, b, c, hidden, beta)?;
            abs_layer_correlation(&config, &rule, &search.solver)
        })
        .collect::<Result<_>>()?;

    let singular: Vec<bool> = values.iter().map(Option::is_none).collect();
    let argmax = match singular.iter().position(|&s| s) {
        Some(i) => i,
        None => values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.unwrap().total_cmp(&b.1.unwrap()))
            .map(|(i, _)| i)
            .unwrap(),
    };
    let abs_chi_vh = (0..values.len())
        .map(|i| {
            values[i].unwrap_or_else(|| {
                let left = i.checked_sub(1).and_then(|j| values[j]);
                let right = values.get(i + 1).copied().flatten();
                left.unwrap_or(0.0).max(right.unwrap_or(0.0))
            })
        })
        .collect();
    Ok(PhaseScan { betas: betas.to_vec(), abs_chi_vh, singular, argmax_beta: betas[argmax] })
}

/// Outcome of [`find_beta_max_with_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct BetaMaxSearch {
    pub beta_max: f64,
    /// `None` when the closed form was used.
    pub scan: Option<PhaseScan>,
}

/// `argmax_beta |chi_vh|` for the initial RBM with biases `b`, `c`.
pub fn find_beta_max(alpha: f64, b: f64, c: f64, hidden: HiddenSpace, search: &SearchConfig) -> Result<f64> {
    find_beta_max_with_scan(alpha, b, c, hidden, search).map(|s| s.beta_max)
}

/// Zero-bias `{-1,1}` hidden units use the closed form (the maximum is the
/// spin-glass transition point). Otherwise: grid scan over `(0, beta_hi]`,
/// bracket the grid maximum by its neighbours, then golden-section refine.
pub fn find_beta_max_with_scan(alpha: f64, b: f64, c: f64, hidden: HiddenSpace, search: &SearchConfig) -> Result<BetaMaxSearch> {
    let critical = beta_critical(alpha)?;
    if hidden == HiddenSpace::Ising && b == 0.0 && c == 0.0 {
        return Ok(BetaMaxSearch { beta_max: critical, scan: None });
    }
    if !(search.grid_step > 0.0) {
        return Err(Error::Domain("grid step must be positive".into()));
    }
    let beta_hi = search.beta_hi_for(alpha, c)?;
    let points = (beta_hi / search.grid_step).round().max(1.0) as usize;
    let betas: Vec<f64> = (1..=points).map(|k| k as f64 * search.grid_step).collect();
    let scan = phase_scan(alpha, b, c, hidden, &betas, search)?;

    let i = scan.argmax_index();
    if i + 1 == betas.len() {
        return Err(Error::SearchFailure {
            beta_hi,
            argmax: scan.argmax_beta,
            trace: betas.iter().copied().zip(scan.abs_chi_vh.iter().copied()).collect(),
        });
    }
    let lo = if i == 0 { 0.5 * betas[0] } else { betas[i - 1] };
    let hi = betas[i + 1];

    let (rb, rc) = search.regularize(b, c, hidden);
    let rule = QuadratureRule::cached(search.quadrature_order)?;
    let objective = |beta: f64| -> Result<f64> {
        let config = ModelConfig::new(alpha, rb, rc, hidden, beta)?;
        Ok(abs_layer_correlation(&config, &rule, &search.solver)?.unwrap_or(f64::INFINITY))
    };
    let beta_max = golden_section_max(objective, lo, hi, search.tolerance)?;
    Ok(BetaMaxSearch { beta_max, scan: Some(scan) })
}

/// Golden-section search for the maximizer of a unimodal function on `[lo, hi]`.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, tolerance: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tolerance {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}
