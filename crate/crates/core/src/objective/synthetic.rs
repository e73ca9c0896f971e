//! Heterogeneous quadratic federations and empirical noise-level estimates.

use serde::{Deserialize, Serialize};

use super::linalg::{self, Matrix};
use super::model::LossModel;
use super::quadratic::QuadraticTask;
use crate::error::{invalid, Result};
use crate::kernel::{chunked_reduce, ParamVector, Purpose, RngStream};

/// Spread of the per-user perturbations around the shared base task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeteroSpread {
    /// Scale of the linear-term perturbations `b_i - b_0`.
    pub grad: f64,
    /// Scale of the curvature perturbations `A_i - A_0` (spectral norm).
    pub hess: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOptions {
    /// Eigenvalue range of the base matrix `A_0`.
    pub curvature: (f64, f64),
    /// Norm of the base linear term `b_0`.
    pub base_offset: f64,
    pub domain_radius: f64,
    /// Reject federations where some `A_i` is not positive definite.
    pub convex: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            curvature: (0.5, 1.0),
            base_offset: 1.0,
            domain_radius: 1.0,
            convex: true,
        }
    }
}

/// Builds `n` quadratic users sharing a random base `(A_0, b_0)`.
///
/// User `i` gets `A_i = A_0 + spread.hess * S_i` and
/// `b_i = b_0 + spread.grad * e_i`, where the directions `S_i` (unit spectral
/// norm) and `e_i` (unit norm) are centered across users. The directions do
/// not depend on the spread, so dissimilarity grows linearly with it and the
/// average task is always `(A_0, b_0)`.
pub fn make_synthetic_federation(
    n: usize,
    d: usize,
    spread: HeteroSpread,
    noise: (f64, f64),
    options: SyntheticOptions,
    rng: &RngStream,
) -> Result<Vec<QuadraticTask>> {
    if n < 2 {
        return Err(invalid("a federation needs at least two users"));
    }
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let (lo, hi) = options.curvature;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(invalid("curvature range must satisfy lo <= hi"));
    }
    if !(spread.grad >= 0.0 && spread.hess >= 0.0) {
        return Err(invalid("spread parameters must be nonnegative"));
    }
    if !(noise.0 >= 0.0 && noise.1 >= 0.0) {
        return Err(invalid("noise levels must be nonnegative"));
    }
    if !(options.domain_radius > 0.0) || !(options.base_offset >= 0.0) {
        return Err(invalid("domain radius must be positive and base offset nonnegative"));
    }

    let mut base_rng = rng.child(Purpose::Custom(0)).rng();
    let q = linalg::random_orthogonal(d, &mut base_rng);
    let eig: Vec<f64> = (0..d)
        .map(|j| if d == 1 { hi } else { lo + (hi - lo) * j as f64 / (d - 1) as f64 })
        .collect();
    let a0 = &q * Matrix::from_diagonal(&nalgebra::DVector::from_vec(eig)) * q.transpose();
    let a0 = (&a0 + a0.transpose()) * 0.5;
    let b0 = linalg::unit_vector(d, &mut base_rng).scaled(options.base_offset);

    let mut hess_dirs: Vec<Matrix> = Vec::with_capacity(n);
    let mut grad_dirs: Vec<ParamVector> = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng.client(i as u64).child(Purpose::Custom(1)).rng();
        hess_dirs.push(linalg::random_symmetric_unit(d, &mut r));
        grad_dirs.push(linalg::unit_vector(d, &mut r));
    }
    let mean_h = hess_dirs.iter().fold(Matrix::zeros(d, d), |acc, s| acc + s) / n as f64;
    let mean_g = ParamVector::mean(&grad_dirs).expect("n >= 2");

    let mut tasks = Vec::with_capacity(n);
    for (i, (s, e)) in hess_dirs.iter().zip(&grad_dirs).enumerate() {
        let a = &a0 + (s - &mean_h) * spread.hess;
        let a = (&a + a.transpose()) * 0.5;
        let mut b = b0.clone();
        b.axpy(spread.grad, &(e - &mean_g));
        if options.convex {
            let m = linalg::min_eigenvalue(&a);
            if !(m > 0.0) {
                return Err(invalid(format!(
                    "user {i} has minimum eigenvalue {m:.3e}; reduce the curvature spread or raise the curvature range"
                )));
            }
        }
        tasks.push(QuadraticTask::new(a, b, noise.0, noise.1, options.domain_radius)?);
    }
    Ok(tasks)
}

/// Exact dissimilarities of a quadratic federation at `w`:
/// `(mean_i ||grad f_i(w) - grad f(w)||^2, mean_i ||A_i - A_bar||_2^2)`.
pub fn quadratic_dissimilarity_at(tasks: &[QuadraticTask], w: &ParamVector) -> Result<(f64, f64)> {
    let (a_bar, b_bar) = federation_mean(tasks)?;
    w.check_dim(b_bar.dim(), "point")?;
    let n = tasks.len() as f64;
    let g_bar = &ParamVector::from_raw(linalg::matvec(&a_bar, w.as_slice())) + &b_bar;
    let mut gg = 0.0;
    let mut gh = 0.0;
    for t in tasks {
        let g = t.exact_grad(w).expect("analytic");
        gg += g.dist(&g_bar).powi(2);
        gh += linalg::spectral_norm(&(t.a() - &a_bar)).powi(2);
    }
    Ok((gg / n, gh / n))
}

/// Domain-ball dissimilarity constants `(gamma_G, gamma_H)` of a quadratic
/// federation: `gamma_H^2 = mean ||A_i - A_bar||_2^2` and
/// `gamma_G^2 = mean (||A_i - A_bar||_2 R + ||b_i - b_bar||)^2`, with `R` the
/// largest declared domain radius.
pub fn quadratic_gamma_bounds(tasks: &[QuadraticTask]) -> Result<(f64, f64)> {
    let (a_bar, b_bar) = federation_mean(tasks)?;
    let r = tasks.iter().map(|t| t.domain_radius()).fold(0.0, f64::max);
    let n = tasks.len() as f64;
    let mut gg = 0.0;
    let mut gh = 0.0;
    for t in tasks {
        let da = linalg::spectral_norm(&(t.a() - &a_bar));
        gh += da * da;
        gg += (da * r + t.b().dist(&b_bar)).powi(2);
    }
    Ok(((gg / n).sqrt(), (gh / n).sqrt()))
}

fn federation_mean(tasks: &[QuadraticTask]) -> Result<(Matrix, ParamVector)> {
    let first = tasks.first().ok_or_else(|| invalid("federation is empty"))?;
    let d = first.dim();
    let mut a = Matrix::zeros(d, d);
    let mut b = ParamVector::zeros(d);
    for t in tasks {
        if t.dim() != d {
            return Err(invalid("tasks have different dimensions"));
        }
        a += t.a();
        b += t.b();
    }
    let n = tasks.len() as f64;
    b.scale(1.0 / n);
    Ok((a / n, b))
}

const HESS_SAMPLE_CAP: usize = 2000;
const POWER_ITERS: usize = 30;
const SHARED_PROBES: usize = 20;

/// Empirical `(sigma_G, sigma_H)`: the largest per-sample gradient and
/// Hessian deviation root-mean-squares over the probe points.
///
/// Gradient deviations are taken against `exact_grad` when the model has it,
/// otherwise against the mean over the drawn samples. With `exact_hvp`, each
/// sample's Hessian deviation norm is found by power iteration from a random
/// unit probe; without it, deviations are measured along shared random unit
/// probes against their sample mean. At most 2000 samples per point are used
/// for the Hessian part.
pub fn estimate_sigma<M: LossModel>(
    model: &M,
    probe_points: &[ParamVector],
    samples_per_point: usize,
    rng: &RngStream,
) -> Result<(f64, f64)> {
    if probe_points.is_empty() {
        return Err(invalid("need at least one probe point"));
    }
    if samples_per_point < 2 {
        return Err(invalid("need at least two samples per point"));
    }
    let d = model.dim();
    let mut best_g = 0.0f64;
    let mut best_h = 0.0f64;
    for (k, w) in probe_points.iter().enumerate() {
        w.check_dim(d, "probe point")?;
        let point = rng.child(Purpose::Probe).child(Purpose::Custom(k as u64));
        let draw = |t: u64| model.draw_sample(&mut point.child(Purpose::Trial(t)).rng());

        let reference = match model.exact_grad(w) {
            Some(g) => g,
            None => {
                let sum = chunked_reduce(
                    samples_per_point,
                    || ParamVector::zeros(d),
                    |acc, t| *acc += &model.grad_sample(&draw(t), w),
                    |a, b| &a + &b,
                );
                sum.scaled(1.0 / samples_per_point as f64)
            }
        };
        let g2 = chunked_reduce(
            samples_per_point,
            || 0.0,
            |acc, t| *acc += model.grad_sample(&draw(t), w).dist(&reference).powi(2),
            |a, b| a + b,
        ) / samples_per_point as f64;
        best_g = best_g.max(g2);

        let m = samples_per_point.min(HESS_SAMPLE_CAP);
        let h2 = if model.exact_hvp(w, &ParamVector::zeros(d)).is_some() {
            chunked_reduce(
                m,
                || 0.0,
                |acc, t| {
                    let s = draw(t);
                    let mut r = point.child(Purpose::Hessian).child(Purpose::Trial(t)).rng();
                    let mut v = linalg::unit_vector(d, &mut r);
                    let mut norm = 0.0;
                    for _ in 0..POWER_ITERS {
                        let dev = &model.hvp_sample(&s, w, &v) - &model.exact_hvp(w, &v).expect("checked");
                        norm = dev.norm();
                        if norm == 0.0 {
                            break;
                        }
                        v = dev.scaled(1.0 / norm);
                    }
                    *acc += norm * norm;
                },
                |a, b| a + b,
            ) / m as f64
        } else {
            let mut r = point.child(Purpose::Hessian).rng();
            let probes: Vec<ParamVector> =
                (0..SHARED_PROBES).map(|_| linalg::unit_vector(d, &mut r)).collect();
            let mut worst = 0.0f64;
            for u in &probes {
                let mean = chunked_reduce(
                    m,
                    || ParamVector::zeros(d),
                    |acc, t| *acc += &model.hvp_sample(&draw(t), w, u),
                    |a, b| &a + &b,
                )
                .scaled(1.0 / m as f64);
                let var = chunked_reduce(
                    m,
                    || 0.0,
                    |acc, t| *acc += model.hvp_sample(&draw(t), w, u).dist(&mean).powi(2),
                    |a, b| a + b,
                ) / m as f64;
                worst = worst.max(var);
            }
            worst
        };
        best_h = best_h.max(h2);
    }
    Ok((best_g.sqrt(), best_h.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spread_gives_identical_tasks() {
        let tasks = make_synthetic_federation(
            5,
            3,
            HeteroSpread::default(),
            (0.0, 0.0),
            SyntheticOptions::default(),
            &RngStream::new(1),
        )
        .unwrap();
        for t in &tasks[1..] {
            assert!((t.a() - tasks[0].a()).norm() < 1e-12);
            assert!(t.b().dist(tasks[0].b()) < 1e-12);
        }
        let (gg, gh) = quadratic_gamma_bounds(&tasks).unwrap();
        assert!(gg < 1e-12 && gh < 1e-12);
    }

    #[test]
    fn two_scalar_users_by_hand() {
        let tasks = vec![
            QuadraticTask::diagonal(&[1.0], &[0.0]).unwrap(),
            QuadraticTask::diagonal(&[3.0], &[0.0]).unwrap(),
        ];
        let (gg, gh) = quadratic_dissimilarity_at(&tasks, &ParamVector::new(vec![1.0]).unwrap()).unwrap();
        assert!((gg - 1.0).abs() < 1e-12);
        assert!((gh - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dissimilarity_grows_with_spread_and_convexity_holds() {
        let mut prev = (0.0, 0.0);
        for s in [0.05, 0.1, 0.2] {
            let tasks = make_synthetic_federation(
                8,
                4,
                HeteroSpread { grad: s, hess: s },
                (0.0, 0.0),
                SyntheticOptions::default(),
                &RngStream::new(3),
            )
            .unwrap();
            for t in &tasks {
                assert!(linalg::min_eigenvalue(t.a()) > 0.0);
            }
            let g = quadratic_gamma_bounds(&tasks).unwrap();
            assert!(g.0 > prev.0 && g.1 > prev.1);
            prev = g;
        }
    }

    #[test]
    fn convex_flag_rejects_indefinite_users() {
        let r = make_synthetic_federation(
            6,
            3,
            HeteroSpread { grad: 0.0, hess: 5.0 },
            (0.0, 0.0),
            SyntheticOptions::default(),
            &RngStream::new(3),
        );
        assert!(r.is_err());
    }

    #[test]
    fn sigma_of_noiseless_task_is_zero() {
        let t = QuadraticTask::diagonal(&[1.0, 2.0], &[0.5, 0.0]).unwrap();
        let w = ParamVector::new(vec![0.3, 0.1]).unwrap();
        let (g, h) = estimate_sigma(&t, &[w], 100, &RngStream::new(0)).unwrap();
        assert_eq!((g, h), (0.0, 0.0));
    }

    #[test]
    fn sigma_recovers_injected_noise() {
        let t = QuadraticTask::diagonal(&[1.0, 2.0, 0.5], &[0.0; 3]).unwrap().with_noise(0.7, 0.4);
        let w = ParamVector::new(vec![0.2, -0.1, 0.3]).unwrap();
        let (g, h) = estimate_sigma(&t, &[w.clone()], 20_000, &RngStream::new(5)).unwrap();
        let expected = t.grad_noise_second_moment(&w);
        assert!((g * g / expected - 1.0).abs() < 0.05, "{} vs {expected}", g * g);
        assert!((h - 0.4).abs() < 1e-6, "{h}");
    }
}
