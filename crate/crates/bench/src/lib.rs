//! Fixtures shared by the benchmarks.

use perfed_core::objective::{
    make_synthetic_federation, Dataset, HeteroSpread, LabeledSample, MlpEluModel, MlpTask, QuadraticTask,
    SyntheticOptions,
};
use perfed_core::{ParamVector, RngStream};
use rand::Rng;

/// A noisy quadratic user of dimension `dim`.
pub fn quadratic(dim: usize) -> QuadraticTask {
    make_synthetic_federation(
        2,
        dim,
        HeteroSpread { grad: 0.5, hess: 0.1 },
        (0.2, 0.1),
        SyntheticOptions::default(),
        &RngStream::new(1),
    )
    .expect("valid federation")
    .remove(0)
}

/// A network of the given widths over `count` random samples, with its initial weights.
pub fn mlp(widths: Vec<usize>, count: usize) -> (MlpTask, ParamVector) {
    let classes = *widths.last().expect("output layer");
    let inputs = widths[0];
    let net = MlpEluModel::new(widths).expect("valid widths");
    let mut r = RngStream::new(2).rng();
    let samples = (0..count)
        .map(|i| LabeledSample {
            x: (0..inputs).map(|_| r.random_range(0.0..1.0)).collect(),
            y: i % classes,
        })
        .collect();
    let w = net.init(&RngStream::new(3));
    let task = MlpTask::new(net, Dataset::new(samples, classes).expect("valid dataset")).expect("valid task");
    (task, w)
}
