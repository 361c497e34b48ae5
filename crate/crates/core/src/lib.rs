//! Explainable neural networks: additive index models
//! `f(x) = mu + sum_k gamma_k h_k(beta_k . x)` whose ridge functions `h_k` are
//! small univariate networks, trained with L1 shrinkage on the projections and
//! ridge weights so that only a few interpretable components survive.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod surrogate;
pub mod train;

pub use dataset::Dataset;
pub use error::{Result, XnnError};
pub use explain::{
    ConditionalEffectProfile, InteractionSignature, RidgeProfile, SparsityReport,
};
pub use model::{init_model, load_model, save_model, Activation, XnnConfig, XnnModel};
pub use surrogate::{distill, FidelityReport};
pub use train::{fit, FitReport, StandardizationParams, TrainConfig};
