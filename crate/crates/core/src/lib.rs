//! Dataset-free RBM initialization from the replica-symmetric phase diagram.
//!
//! [`meanfield`] solves the saddle-point equations and locates `beta_max`, the
//! inverse temperature maximizing the visible-hidden susceptibility;
//! [`initialization`] draws weights at that scale. The rest is the toolkit
//! needed to check that it helps: exact and annealed likelihoods, training,
//! and the toy / binarized datasets.

pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod exact;
pub mod initialization;
pub mod meanfield;
pub mod quadrature;
pub mod rbm;
pub mod rng;
pub mod training;

pub use datasets::{binarize, gen_toy, BinarizeMode, Dataset, ToySpec};
pub use error::{Error, Result};
pub use evaluation::{log_likelihood, EvalMode, MaisConfig, MaisEstimate};
pub use exact::{model_statistics, ModelStatistics};
pub use initialization::{dataset_free_init, init_rbm, InitSpec};
pub use meanfield::{
    beta_critical, find_beta_max, free_energy, phase_scan, solve_saddle_point, susceptibility, HiddenSpace, ModelConfig,
    PhaseScan, SaddlePoint, SearchConfig, SusceptibilityMatrix,
};
pub use quadrature::QuadratureRule;
pub use rbm::Rbm;
pub use training::{train, GradientMode, TrainConfig, TrainOutcome};
