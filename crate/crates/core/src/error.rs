use thiserror::Error;

/// Errors raised by the analysis, sampling and training routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("integrand is not finite at node z = {node} (value {value})")]
    NodeEvaluation { node: f64, value: f64 },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("saddle-point iteration did not converge after {iterations} iterations (residual {residual:e}, last q_v = {q_v}, q_h = {q_h}){}", beta.map(|b| format!(" at beta = {b}")).unwrap_or_default())]
    NonConvergence {
        iterations: usize,
        residual: f64,
        q_v: f64,
        q_h: f64,
        beta: Option<f64>,
    },

    #[error("susceptibility is singular: |det(I - beta^2 W T)| = {det:e}")]
    SingularSusceptibility { det: f64 },

    #[error("no interior maximum of |chi_vh| in (0, {beta_hi}]; scan argmax at beta = {argmax}")]
    SearchFailure {
        beta_hi: f64,
        argmax: f64,
        trace: Vec<(f64, f64)>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("exact enumeration over {n} visible units exceeds the cap of {cap}; use mAIS instead")]
    EnumerationCap { n: usize, cap: usize },

    #[error("non-finite gradient component")]
    NonFiniteGradient,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
