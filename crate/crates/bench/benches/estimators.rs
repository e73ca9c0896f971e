use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use perfed_bench::{mlp, quadratic};
use perfed_core::metagrad::estimate;
use perfed_core::objective::LossModel;
use perfed_core::{BatchSizes, EstimatorKind, MetaEstimator, ParamVector, Purpose, RngStream};

fn meta_gradients(c: &mut Criterion) {
    let task = quadratic(20);
    let w = ParamVector::from_fn(20, |j| 0.01 * j as f64);
    let mut group = c.benchmark_group("meta_gradient_quadratic20_d16");
    for kind in [EstimatorKind::Stochastic, EstimatorKind::FirstOrder, EstimatorKind::HessianFree] {
        let est = MetaEstimator::new(0.3, kind, BatchSizes::uniform(16)).unwrap();
        let rng = RngStream::new(9);
        let mut t = 0u64;
        group.bench_function(BenchmarkId::from_parameter(kind.name()), |b| {
            b.iter(|| {
                t += 1;
                estimate(&task, &w, &est, &rng.child(Purpose::Trial(t))).unwrap()
            })
        });
    }
    group.finish();
}

fn network(c: &mut Criterion) {
    let (task, w) = mlp(vec![64, 80, 60, 10], 1);
    let v = ParamVector::from_fn(w.dim(), |j| ((j % 7) as f64 - 3.0) * 0.1);
    let mut r = RngStream::new(4).rng();
    let s = task.draw_sample(&mut r);
    c.bench_function("mlp_backprop_64_80_60_10", |b| b.iter(|| task.grad_sample(&s, &w)));
    c.bench_function("mlp_hvp_64_80_60_10", |b| b.iter(|| task.hvp_sample(&s, &w, &v)));
}

criterion_group!(benches, meta_gradients, network);
criterion_main!(benches);
