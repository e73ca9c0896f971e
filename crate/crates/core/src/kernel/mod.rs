//! Numeric substrate shared by every other module: dense parameter vectors,
//! path-keyed random streams, subset sampling and a finite-difference oracle.

mod finite_diff;
mod rng;
mod sampling;
mod vector;

pub use finite_diff::{finite_diff_grad, relative_error, DEFAULT_FD_STEP};
pub use rng::{Purpose, RngStream, StreamRng};
pub use sampling::{
    active_count, sample_without_replacement, subset_mean_variance, IndexSubset,
};
pub use vector::ParamVector;

pub(crate) use sampling::chunked_reduce;
