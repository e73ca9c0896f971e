use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{self, Matrix};
use super::model::{LossModel, ModelConstants};
use crate::error::{invalid, Result};
use crate::kernel::{ParamVector, StreamRng};

/// One noise realization of a [`QuadraticTask`]: an additive gradient
/// perturbation `xi` and a rank-one Hessian perturbation `coeff * u u^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadSample {
    pub xi: Vec<f64>,
    pub coeff: f64,
    pub u: Vec<f64>,
}

/// `f(w) = 1/2 w^T A w + b^T w` observed through noisy samples
/// `l(s; w) = 1/2 w^T (A + c u u^T) w + (b + xi)^T w`, where
/// `xi ~ N(0, grad_noise_std^2 I)`, `u` is uniform on the unit sphere and
/// `c = ±hess_noise_std` with equal probability.
///
/// The per-sample Hessian deviation has spectral norm exactly
/// `hess_noise_std`, and the per-sample gradient deviation at `w` has second
/// moment `d grad_noise_std^2 + hess_noise_std^2 ||w||^2 / d`.
#[derive(Clone, Debug)]
pub struct QuadraticTask {
    a: Matrix,
    b: ParamVector,
    grad_noise_std: f64,
    hess_noise_std: f64,
    domain_radius: f64,
    spectral: f64,
}

impl QuadraticTask {
    pub fn new(
        a: Matrix,
        b: ParamVector,
        grad_noise_std: f64,
        hess_noise_std: f64,
        domain_radius: f64,
    ) -> Result<Self> {
        let d = b.dim();
        if a.nrows() != d || a.ncols() != d {
            return Err(invalid(format!(
                "A is {}x{}, expected {d}x{d}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !linalg::is_symmetric(&a, 1e-12) {
            return Err(invalid("A must be symmetric"));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(invalid("A has non-finite entries"));
        }
        if !(grad_noise_std >= 0.0) || !(hess_noise_std >= 0.0) {
            return Err(invalid("noise levels must be nonnegative"));
        }
        if !(domain_radius > 0.0) {
            return Err(invalid("domain radius must be positive"));
        }
        let spectral = linalg::spectral_norm(&a);
        Ok(Self {
            a,
            b,
            grad_noise_std,
            hess_noise_std,
            domain_radius,
            spectral,
        })
    }

    /// Noiseless task with unit domain radius.
    pub fn noiseless(a: Matrix, b: ParamVector) -> Result<Self> {
        Self::new(a, b, 0.0, 0.0, 1.0)
    }

    /// Diagonal task, convenient for hand-computed fixtures.
    pub fn diagonal(diag: &[f64], b: &[f64]) -> Result<Self> {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag));
        Self::noiseless(a, ParamVector::new(b.to_vec())?)
    }

    pub fn with_noise(mut self, grad_noise_std: f64, hess_noise_std: f64) -> Self {
        self.grad_noise_std = grad_noise_std;
        self.hess_noise_std = hess_noise_std;
        self
    }

    pub fn with_domain_radius(mut self, r: f64) -> Self {
        self.domain_radius = r;
        self
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &ParamVector {
        &self.b
    }

    pub fn grad_noise_std(&self) -> f64 {
        self.grad_noise_std
    }

    pub fn hess_noise_std(&self) -> f64 {
        self.hess_noise_std
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// `||A||_2`.
    pub fn smoothness(&self) -> f64 {
        self.spectral
    }

    /// Exact `E ||grad l(s; w) - grad f(w)||^2` at `w`.
    pub fn grad_noise_second_moment(&self, w: &ParamVector) -> f64 {
        let d = self.dim() as f64;
        d * self.grad_noise_std.powi(2) + self.hess_noise_std.powi(2) * w.norm_sq() / d
    }

    fn av(&self, v: &ParamVector) -> ParamVector {
        ParamVector::from_raw(linalg::matvec(&self.a, v.as_slice()))
    }

    fn add_sample_noise(&self, s: &QuadSample, w: &ParamVector, out: &mut ParamVector, with_xi: bool) {
        if with_xi {
            for (o, x) in out.as_mut_slice().iter_mut().zip(&s.xi) {
                *o += x;
            }
        }
        if !s.u.is_empty() {
            let uw: f64 = s.u.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
            let c = s.coeff * uw;
            for (o, ui) in out.as_mut_slice().iter_mut().zip(&s.u) {
                *o += c * ui;
            }
        }
    }
}

impl LossModel for QuadraticTask {
    type Sample = QuadSample;

    fn dim(&self) -> usize {
        self.b.dim()
    }

    fn loss(&self, s: &QuadSample, w: &ParamVector) -> f64 {
        let mut value = self.exact_loss(w).expect("analytic");
        value += s.xi.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum::<f64>();
        if !s.u.is_empty() {
            let uw: f64 = s.u.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
            value += 0.5 * s.coeff * uw * uw;
        }
        value
    }

    fn grad_sample(&self, s: &QuadSample, w: &ParamVector) -> ParamVector {
        let mut g = self.av(w);
        g += &self.b;
        self.add_sample_noise(s, w, &mut g, true);
        g
    }

    fn hvp_sample(&self, s: &QuadSample, _w: &ParamVector, v: &ParamVector) -> ParamVector {
        let mut h = self.av(v);
        self.add_sample_noise(s, v, &mut h, false);
        h
    }

    fn draw_sample(&self, rng: &mut StreamRng) -> QuadSample {
        let d = self.dim();
        let xi = if self.grad_noise_std > 0.0 {
            (0..d)
                .map(|_| self.grad_noise_std * rng.sample::<f64, _>(StandardNormal))
                .collect()
        } else {
            Vec::new()
        };
        let (coeff, u) = if self.hess_noise_std > 0.0 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let u = linalg::unit_vector(d, rng).into_vec();
            (sign * self.hess_noise_std, u)
        } else {
            (0.0, Vec::new())
        };
        QuadSample { xi, coeff, u }
    }

    fn exact_loss(&self, w: &ParamVector) -> Option<f64> {
        Some(0.5 * w.dot(&self.av(w)) + self.b.dot(w))
    }

    fn exact_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        let mut g = self.av(w);
        g += &self.b;
        Some(g)
    }

    fn exact_hvp(&self, _w: &ParamVector, v: &ParamVector) -> Option<ParamVector> {
        Some(self.av(v))
    }

    fn constants(&self) -> ModelConstants {
        let r = self.domain_radius;
        let d = self.dim() as f64;
        ModelConstants {
            grad_bound: Some(self.spectral * r + self.b.norm()),
            smoothness: Some(self.spectral),
            hessian_lipschitz: Some(0.0),
            grad_std: Some(
                (d * self.grad_noise_std.powi(2) + self.hess_noise_std.powi(2) * r * r / d).sqrt(),
            ),
            hess_std: Some(self.hess_noise_std),
            domain_radius: Some(r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{finite_diff_grad, relative_error, RngStream};
    use crate::objective::{batch_grad, batch_hvp, draw_batch};

    fn task() -> QuadraticTask {
        let a = Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 1.5]);
        QuadraticTask::new(a, ParamVector::new(vec![0.1, -0.2, 0.3]).unwrap(), 0.4, 0.3, 2.0)
            .unwrap()
    }

    #[test]
    fn rejects_asymmetric() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(QuadraticTask::noiseless(a, ParamVector::zeros(2)).is_err());
    }

    #[test]
    fn per_sample_gradient_and_hvp_match_finite_differences() {
        let t = task();
        let s = RngStream::new(11);
        let batch = draw_batch(&t, 10, &s).unwrap();
        let w = ParamVector::new(vec![0.3, -0.7, 0.2]).unwrap();
        let v = ParamVector::new(vec![1.0, 0.5, -0.25]).unwrap();
        for sample in batch.samples() {
            let g = t.grad_sample(sample, &w);
            let fd = finite_diff_grad(|x| Ok(t.loss(sample, x)), &w, 1e-5).unwrap();
            assert!(relative_error(&g, &fd) < 1e-8);
            let hv = t.hvp_sample(sample, &w, &v);
            let fd_h = finite_diff_grad(|x| Ok(t.grad_sample(sample, x).dot(&v)), &w, 1e-5).unwrap();
            assert!(relative_error(&hv, &fd_h) < 1e-8);
        }
    }

    #[test]
    fn noiseless_batches_are_exact() {
        let t = task().with_noise(0.0, 0.0);
        let w = ParamVector::new(vec![0.3, -0.7, 0.2]).unwrap();
        let v = ParamVector::new(vec![1.0, 0.5, -0.25]).unwrap();
        let batch = draw_batch(&t, 7, &RngStream::new(2)).unwrap();
        let g = batch_grad(&t, &w, &batch).unwrap();
        assert!(g.dist(&t.exact_grad(&w).unwrap()) < 1e-14);
        let hv = batch_hvp(&t, &w, &v, &batch).unwrap();
        assert!(hv.dist(&t.exact_hvp(&w, &v).unwrap()) < 1e-14);
        assert_eq!(batch_hvp(&t, &w, &ParamVector::zeros(3), &batch).unwrap().norm(), 0.0);
    }

    #[test]
    fn declared_constants() {
        let t = task();
        let c = t.constants();
        assert_eq!(c.hessian_lipschitz, Some(0.0));
        assert!((c.smoothness.unwrap() - linalg::spectral_norm(t.a())).abs() < 1e-15);
        let expected_std = (3.0 * 0.16 + 0.09 * 4.0 / 3.0f64).sqrt();
        assert!((c.grad_std.unwrap() - expected_std).abs() < 1e-12);
        assert_eq!(c.hess_std, Some(0.3));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let t = task();
        let batch = draw_batch(&t, 2, &RngStream::new(2)).unwrap();
        assert!(batch_grad(&t, &ParamVector::zeros(2), &batch).is_err());
        assert!(batch_hvp(&t, &ParamVector::zeros(3), &ParamVector::zeros(4), &batch).is_err());
    }
}
