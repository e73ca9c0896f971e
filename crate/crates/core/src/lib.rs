//! Personalized federated learning with a model-agnostic meta-learning
//! objective: meta-gradient estimators, the federated round engine,
//! heterogeneity measures and analytic bound diagnostics.

pub mod diagnostics;
pub mod error;
pub mod federation;
pub mod heterogeneity;
pub mod kernel;
pub mod metagrad;
pub mod objective;

pub use error::{Error, Result};
pub use kernel::{ParamVector, Purpose, RngStream};
pub use metagrad::{BatchSizes, EstimatorKind, MetaEstimator, MetaGradSample};
