use perfed_core::heterogeneity::{tv_distance, wasserstein1, DiscreteDistribution};
use perfed_core::kernel::{active_count, sample_without_replacement};
use perfed_core::metagrad::meta_grad_exact;
use perfed_core::objective::{batch_grad, batch_loss, draw_batch, Batch, LossModel, QuadraticTask};
use perfed_core::{ParamVector, RngStream};
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, dim)
}

fn distribution(max: usize) -> impl Strategy<Value = DiscreteDistribution<f64>> {
    (1..=max)
        .prop_flat_map(|k| (prop::collection::vec(-2.0f64..2.0, k), prop::collection::vec(0.05f64..1.0, k)))
        .prop_map(|(pts, raw)| {
            let s: f64 = raw.iter().sum();
            DiscreteDistribution::new(pts, raw.iter().map(|m| m / s).collect()).unwrap()
        })
}

fn close(a: &ParamVector, b: &ParamVector, tol: f64) -> bool {
    a.dist(b) <= tol * (1.0 + a.norm().max(b.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn batch_statistics_ignore_sample_order(
        diag in prop::collection::vec(0.1f64..2.0, 4),
        b in vector(4),
        w in vector(4),
        size in 2usize..12,
        seed in any::<u64>(),
        rot in 0usize..12,
    ) {
        let task = QuadraticTask::diagonal(&diag, &b).unwrap().with_noise(0.5, 0.3);
        let w = ParamVector::new(w).unwrap();
        let batch = draw_batch(&task, size, &RngStream::new(seed)).unwrap();
        let mut samples = batch.samples().to_vec();
        samples.rotate_left(rot % size);
        samples.reverse();
        let shuffled = Batch::new(samples).unwrap();
        let g1 = batch_grad(&task, &w, &batch).unwrap();
        let g2 = batch_grad(&task, &w, &shuffled).unwrap();
        prop_assert!(close(&g1, &g2, 1e-12));
        let (l1, l2) = (batch_loss(&task, &w, &batch).unwrap(), batch_loss(&task, &w, &shuffled).unwrap());
        prop_assert!((l1 - l2).abs() <= 1e-12 * (1.0 + l1.abs()));
    }

    #[test]
    fn averaging_is_linear(
        xs in prop::collection::vec(vector(3), 1..8),
        ys_seed in any::<u64>(),
        c in -2.0f64..2.0,
    ) {
        let a: Vec<ParamVector> = xs.into_iter().map(|x| ParamVector::new(x).unwrap()).collect();
        let mut r = RngStream::new(ys_seed).rng();
        let b: Vec<ParamVector> = a
            .iter()
            .map(|_| ParamVector::from_fn(3, |_| rand::Rng::random_range(&mut r, -1.0..1.0)))
            .collect();
        let combined: Vec<ParamVector> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                let mut z = x.clone();
                z.axpy(c, y);
                z
            })
            .collect();
        let mut expect = ParamVector::mean(&a).unwrap();
        expect.axpy(c, &ParamVector::mean(&b).unwrap());
        prop_assert!(close(&ParamVector::mean(&combined).unwrap(), &expect, 1e-12));
    }

    #[test]
    fn exact_meta_gradient_matches_diagonal_formula(
        diag in prop::collection::vec(0.1f64..2.0, 3),
        b in vector(3),
        w in vector(3),
        alpha in 0.0f64..0.5,
    ) {
        let task = QuadraticTask::diagonal(&diag, &b).unwrap();
        let g = meta_grad_exact(&task, &ParamVector::new(w.clone()).unwrap(), alpha).unwrap();
        for j in 0..3 {
            let inner = w[j] - alpha * (diag[j] * w[j] + b[j]);
            let want = (1.0 - alpha * diag[j]) * (diag[j] * inner + b[j]);
            prop_assert!((g[j] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
        prop_assert_eq!(task.dim(), 3);
    }

    #[test]
    fn w1_is_a_metric(p in distribution(6), q in distribution(6), s in distribution(6)) {
        let d = |a: &f64, b: &f64| (a - b).abs();
        let pq = wasserstein1(&p, &q, d).unwrap();
        let qp = wasserstein1(&q, &p, d).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!(wasserstein1(&p, &p, d).unwrap().abs() <= 1e-12);
        prop_assert!((pq - qp).abs() <= 1e-12);
        let via = wasserstein1(&p, &s, d).unwrap() + wasserstein1(&s, &q, d).unwrap();
        prop_assert!(pq <= via + 1e-12);
    }

    #[test]
    fn w1_is_at_most_diameter_times_tv(p in distribution(6), q in distribution(6)) {
        let d = |a: &f64, b: &f64| (a - b).abs();
        let tv = tv_distance(&p, &q);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&tv));
        prop_assert!(wasserstein1(&p, &q, d).unwrap() <= 4.0 * tv + 1e-12);
    }

    #[test]
    fn subsets_are_distinct_and_in_range(n in 1usize..40, r in 0.01f64..1.0, seed in any::<u64>()) {
        let m = active_count(n, r);
        let s = sample_without_replacement(n, m, &RngStream::new(seed)).unwrap();
        prop_assert_eq!(s.len(), m);
        prop_assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.indices().iter().all(|&i| i < n));
    }
}
