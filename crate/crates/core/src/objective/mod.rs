//! Per-user objectives: the loss-model interface, batch estimators, analytic
//! test tasks, the ELU network and data loading.

mod analytic;
mod dataset;
mod idx;
pub mod linalg;
mod mlp;
mod model;
mod quadratic;
mod synthetic;

pub use analytic::{CubicTask, KinkTask, SharedLossTask, SupportPoint};
pub use dataset::{Dataset, LabeledSample};
pub use idx::{
    encode_images, encode_labels, load_idx_dataset, parse_images, parse_labels, write_images,
    write_labels, IdxImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use mlp::{mlp_loss_and_grad, MlpEluModel, MlpTask};
pub use model::{batch_grad, batch_hvp, batch_loss, draw_batch, Batch, LossModel, ModelConstants};
pub use quadratic::{QuadSample, QuadraticTask};
pub use synthetic::{
    estimate_sigma, make_synthetic_federation, quadratic_dissimilarity_at, quadratic_gamma_bounds,
    HeteroSpread, SyntheticOptions,
};
