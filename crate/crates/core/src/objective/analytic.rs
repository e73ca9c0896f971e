//! Further analytic tasks used by the bound checks: a cubic-regularized
//! quadratic (nonzero Hessian Lipschitz constant), a separable task whose
//! gradient has a smoothed absolute-value kink, and a finite-support family
//! sharing one per-sample loss across users.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{self, Matrix};
use super::model::{LossModel, ModelConstants};
use crate::error::{invalid, Result};
use crate::kernel::{ParamVector, StreamRng};

fn gaussian_noise(dim: usize, std: f64, rng: &mut StreamRng) -> Vec<f64> {
    if std > 0.0 {
        (0..dim).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
    } else {
        Vec::new()
    }
}

fn add_noise(g: &mut ParamVector, xi: &[f64]) {
    for (o, x) in g.as_mut_slice().iter_mut().zip(xi) {
        *o += x;
    }
}

/// `f(w) = 1/2 w^T A w + b^T w + (rho/6) ||w||^3` with additive Gaussian
/// gradient noise. Its Hessian is exactly `rho`-Lipschitz.
#[derive(Clone, Debug)]
pub struct CubicTask {
    a: Matrix,
    b: ParamVector,
    rho: f64,
    grad_noise_std: f64,
    domain_radius: f64,
    spectral: f64,
}

impl CubicTask {
    pub fn new(a: Matrix, b: ParamVector, rho: f64, grad_noise_std: f64, domain_radius: f64) -> Result<Self> {
        let d = b.dim();
        if a.nrows() != d || a.ncols() != d || !linalg::is_symmetric(&a, 1e-12) {
            return Err(invalid("A must be a symmetric matrix matching b"));
        }
        if !(rho >= 0.0) || !(grad_noise_std >= 0.0) || !(domain_radius > 0.0) {
            return Err(invalid("rho and noise must be nonnegative, radius positive"));
        }
        let spectral = linalg::spectral_norm(&a);
        Ok(Self {
            a,
            b,
            rho,
            grad_noise_std,
            domain_radius,
            spectral,
        })
    }

    fn av(&self, v: &ParamVector) -> ParamVector {
        ParamVector::from_raw(linalg::matvec(&self.a, v.as_slice()))
    }
}

impl LossModel for CubicTask {
    type Sample = Vec<f64>;

    fn dim(&self) -> usize {
        self.b.dim()
    }

    fn loss(&self, xi: &Vec<f64>, w: &ParamVector) -> f64 {
        let noise: f64 = xi.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
        self.exact_loss(w).expect("analytic") + noise
    }

    fn grad_sample(&self, xi: &Vec<f64>, w: &ParamVector) -> ParamVector {
        let mut g = self.exact_grad(w).expect("analytic");
        add_noise(&mut g, xi);
        g
    }

    fn hvp_sample(&self, _xi: &Vec<f64>, w: &ParamVector, v: &ParamVector) -> ParamVector {
        self.exact_hvp(w, v).expect("analytic")
    }

    fn draw_sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        gaussian_noise(self.dim(), self.grad_noise_std, rng)
    }

    fn exact_loss(&self, w: &ParamVector) -> Option<f64> {
        let n = w.norm();
        Some(0.5 * w.dot(&self.av(w)) + self.b.dot(w) + self.rho / 6.0 * n * n * n)
    }

    fn exact_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        let mut g = self.av(w);
        g += &self.b;
        g.axpy(0.5 * self.rho * w.norm(), w);
        Some(g)
    }

    fn exact_hvp(&self, w: &ParamVector, v: &ParamVector) -> Option<ParamVector> {
        let mut h = self.av(v);
        let n = w.norm();
        if n > 0.0 {
            h.axpy(0.5 * self.rho * n, v);
            h.axpy(0.5 * self.rho * w.dot(v) / n, w);
        }
        Some(h)
    }

    fn constants(&self) -> ModelConstants {
        let r = self.domain_radius;
        ModelConstants {
            grad_bound: Some(self.spectral * r + self.b.norm() + 0.5 * self.rho * r * r),
            smoothness: Some(self.spectral + self.rho * r),
            hessian_lipschitz: Some(self.rho),
            grad_std: Some((self.dim() as f64).sqrt() * self.grad_noise_std),
            hess_std: Some(0.0),
            domain_radius: Some(r),
        }
    }
}

/// Separable task `f(w) = L sum_j phi(w_j - c_j)` with
/// `phi'(u) = sqrt(u^2 + eps^2)`: a gradient with a smoothed `|u|` kink.
///
/// Inner-step noise of scale `s >> eps` across the kink shifts the expected
/// outer gradient by `Theta(s)`, so the meta-gradient bias of the stochastic
/// estimator decays like `1/sqrt(D)` rather than `1/D`.
#[derive(Clone, Debug)]
pub struct KinkTask {
    center: ParamVector,
    slope: f64,
    eps: f64,
    grad_noise_std: f64,
    domain_radius: f64,
}

impl KinkTask {
    pub fn new(center: ParamVector, slope: f64, eps: f64, grad_noise_std: f64, domain_radius: f64) -> Result<Self> {
        if !(slope > 0.0) || !(eps > 0.0) || !(grad_noise_std >= 0.0) || !(domain_radius > 0.0) {
            return Err(invalid("kink task needs slope, eps, radius > 0 and noise >= 0"));
        }
        Ok(Self {
            center,
            slope,
            eps,
            grad_noise_std,
            domain_radius,
        })
    }

    fn phi(&self, u: f64) -> f64 {
        let e = self.eps;
        0.5 * (u * (u * u + e * e).sqrt() + e * e * (u / e).asinh())
    }
}

impl LossModel for KinkTask {
    type Sample = Vec<f64>;

    fn dim(&self) -> usize {
        self.center.dim()
    }

    fn loss(&self, xi: &Vec<f64>, w: &ParamVector) -> f64 {
        let noise: f64 = xi.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
        self.exact_loss(w).expect("analytic") + noise
    }

    fn grad_sample(&self, xi: &Vec<f64>, w: &ParamVector) -> ParamVector {
        let mut g = self.exact_grad(w).expect("analytic");
        add_noise(&mut g, xi);
        g
    }

    fn hvp_sample(&self, _xi: &Vec<f64>, w: &ParamVector, v: &ParamVector) -> ParamVector {
        self.exact_hvp(w, v).expect("analytic")
    }

    fn draw_sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        gaussian_noise(self.dim(), self.grad_noise_std, rng)
    }

    fn exact_loss(&self, w: &ParamVector) -> Option<f64> {
        Some(
            self.slope
                * w.as_slice()
                    .iter()
                    .zip(self.center.as_slice())
                    .map(|(x, c)| self.phi(x - c))
                    .sum::<f64>(),
        )
    }

    fn exact_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        let e2 = self.eps * self.eps;
        Some(ParamVector::from_fn(self.dim(), |j| {
            let u = w[j] - self.center[j];
            self.slope * (u * u + e2).sqrt()
        }))
    }

    fn exact_hvp(&self, w: &ParamVector, v: &ParamVector) -> Option<ParamVector> {
        let e2 = self.eps * self.eps;
        Some(ParamVector::from_fn(self.dim(), |j| {
            let u = w[j] - self.center[j];
            self.slope * u / (u * u + e2).sqrt() * v[j]
        }))
    }

    fn constants(&self) -> ModelConstants {
        let reach = self.domain_radius + self.center.norm();
        let d = self.dim() as f64;
        ModelConstants {
            grad_bound: Some(self.slope * (reach * reach + d * self.eps * self.eps).sqrt()),
            smoothness: Some(self.slope),
            hessian_lipschitz: Some(self.slope / self.eps),
            grad_std: Some(d.sqrt() * self.grad_noise_std),
            hess_std: Some(0.0),
            domain_radius: Some(self.domain_radius),
        }
    }
}

/// A point `z` of a shared finite data space with per-sample loss
/// `l(z; w) = 1/2 scale ||w - center||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportPoint {
    pub scale: f64,
    pub center: ParamVector,
}

/// User task `f_i(w) = sum_z p_i(z) l(z; w)` over a support shared by every
/// user; only the mass vector `p_i` differs between users.
#[derive(Clone, Debug)]
pub struct SharedLossTask {
    support: Arc<Vec<SupportPoint>>,
    mass: Vec<f64>,
    cumulative: Vec<f64>,
    domain_radius: f64,
}

impl SharedLossTask {
    pub fn new(support: Arc<Vec<SupportPoint>>, mass: Vec<f64>, domain_radius: f64) -> Result<Self> {
        if support.is_empty() || support.len() != mass.len() {
            return Err(invalid("mass vector must match a nonempty support"));
        }
        let d = support[0].center.dim();
        if support.iter().any(|z| z.center.dim() != d || !(z.scale > 0.0)) {
            return Err(invalid("support points need equal dimension and positive scale"));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) || (mass.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid("mass must be a probability vector"));
        }
        let mut acc = 0.0;
        let cumulative = mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Ok(Self {
            support,
            mass,
            cumulative,
            domain_radius,
        })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn support(&self) -> &[SupportPoint] {
        &self.support
    }

    /// Per-sample bounds over the whole support on the domain ball:
    /// `(max ||grad l(z; w)||, max ||hess l(z; w)||)`.
    pub fn per_sample_bounds(&self) -> (f64, f64) {
        let r = self.domain_radius;
        let b = self
            .support
            .iter()
            .map(|z| z.scale * (r + z.center.norm()))
            .fold(0.0, f64::max);
        let l = self.support.iter().map(|z| z.scale).fold(0.0, f64::max);
        (b, l)
    }
}

impl LossModel for SharedLossTask {
    type Sample = usize;

    fn dim(&self) -> usize {
        self.support[0].center.dim()
    }

    fn loss(&self, &z: &usize, w: &ParamVector) -> f64 {
        let p = &self.support[z];
        0.5 * p.scale * w.dist(&p.center).powi(2)
    }

    fn grad_sample(&self, &z: &usize, w: &ParamVector) -> ParamVector {
        let p = &self.support[z];
        (w - &p.center).scaled(p.scale)
    }

    fn hvp_sample(&self, &z: &usize, _w: &ParamVector, v: &ParamVector) -> ParamVector {
        v.scaled(self.support[z].scale)
    }

    fn draw_sample(&self, rng: &mut StreamRng) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.mass.len() - 1)
    }

    fn exact_loss(&self, w: &ParamVector) -> Option<f64> {
        Some((0..self.mass.len()).map(|z| self.mass[z] * self.loss(&z, w)).sum())
    }

    fn exact_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        let mut g = ParamVector::zeros(self.dim());
        for (z, &m) in self.mass.iter().enumerate() {
            if m > 0.0 {
                g.axpy(m, &self.grad_sample(&z, w));
            }
        }
        Some(g)
    }

    fn exact_hvp(&self, _w: &ParamVector, v: &ParamVector) -> Option<ParamVector> {
        let s: f64 = self
            .mass
            .iter()
            .zip(self.support.iter())
            .map(|(m, z)| m * z.scale)
            .sum();
        Some(v.scaled(s))
    }

    fn constants(&self) -> ModelConstants {
        let (b, l) = self.per_sample_bounds();
        ModelConstants {
            grad_bound: Some(b),
            smoothness: Some(l),
            hessian_lipschitz: Some(0.0),
            grad_std: None,
            hess_std: None,
            domain_radius: Some(self.domain_radius),
        }
    }
}
