//! Label-skew partitioning, distances between user distributions and the
//! task-dissimilarity constants they bound.

mod distance;
mod gamma;
mod partition;

pub use distance::{
    euclidean, tv_distance, wasserstein1, wasserstein1_1d, DiscreteDistribution, W1_SUPPORT_CAP,
};
pub use gamma::{
    estimate_gamma, tv_gamma_bound, tv_to_mixture, w1_gamma_bound, w1_to_mixture, SimilarityReport,
    DEFAULT_HVP_PROBES,
};
pub use partition::{
    label_distribution, partition_csv, partition_dataset, write_partition_csv, Partition, PartitionSpec,
    PARTITION_CLASSES,
};
