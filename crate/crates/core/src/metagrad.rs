//! The meta-function `F_i(w) = f_i(w - alpha grad f_i(w))` and estimators of
//! its gradient.
//!
//! Every estimator runs in two stages. The inner stage forms the adapted point
//! `w~ = w - alpha g_in` from an inner gradient estimate; the outer stage turns
//! `w~` into the gradient estimate. Hessian products are always matrix-free.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{ParamVector, Purpose, RngStream};
use crate::objective::{batch_grad, batch_hvp, draw_batch, LossModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Exact,
    Stochastic,
    #[serde(rename = "fo")]
    FirstOrder,
    #[serde(rename = "hf")]
    HessianFree,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Exact,
        EstimatorKind::Stochastic,
        EstimatorKind::FirstOrder,
        EstimatorKind::HessianFree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Exact => "exact",
            EstimatorKind::Stochastic => "stochastic",
            EstimatorKind::FirstOrder => "fo",
            EstimatorKind::HessianFree => "hf",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown estimator `{s}` (expected exact, stochastic, fo or hf)")))
    }
}

/// Sample counts `(D, D', D'')` for the inner gradient, the outer gradient and
/// the Hessian (or gradient-difference) batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSizes {
    pub inner: usize,
    pub outer: usize,
    pub hessian: usize,
}

impl BatchSizes {
    pub fn new(inner: usize, outer: usize, hessian: usize) -> Self {
        Self { inner, outer, hessian }
    }

    pub fn uniform(size: usize) -> Self {
        Self::new(size, size, size)
    }

    const NONE: BatchSizes = BatchSizes { inner: 0, outer: 0, hessian: 0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaEstimator {
    pub alpha: f64,
    pub kind: EstimatorKind,
    pub batches: BatchSizes,
    /// Finite-difference radius for the Hessian-free variant. `None` selects
    /// `1e-3 / max(1, ||g~||)` per call.
    pub delta: Option<f64>,
}

impl MetaEstimator {
    pub fn new(alpha: f64, kind: EstimatorKind, batches: BatchSizes) -> Result<Self> {
        let est = Self {
            alpha,
            kind,
            batches,
            delta: None,
        };
        est.validate()?;
        Ok(est)
    }

    pub fn exact(alpha: f64) -> Result<Self> {
        Self::new(alpha, EstimatorKind::Exact, BatchSizes::uniform(1))
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = Some(delta);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("inner stepsize alpha must be finite and nonnegative"));
        }
        if self.kind != EstimatorKind::Exact {
            let b = self.batches;
            if b.inner == 0 || b.outer == 0 {
                return Err(invalid("batch sizes must be positive"));
            }
            if matches!(self.kind, EstimatorKind::Stochastic | EstimatorKind::HessianFree) && b.hessian == 0 {
                return Err(invalid("batch sizes must be positive"));
            }
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(invalid("delta must be positive"));
            }
        }
        Ok(())
    }

    /// Rejects `alpha L > 1` when the smoothness constant is known.
    pub fn check_smoothness(&self, smoothness: Option<f64>) -> Result<()> {
        match smoothness {
            Some(l) if self.alpha * l > 1.0 + 1e-12 => Err(Error::HypothesisViolation(format!(
                "alpha L <= 1 required (alpha = {}, L = {l}, alpha L = {})",
                self.alpha,
                self.alpha * l
            ))),
            _ => Ok(()),
        }
    }

    pub fn check_model<M: LossModel>(&self, model: &M) -> Result<()> {
        self.validate()?;
        self.check_smoothness(model.constants().smoothness)
    }

    /// Batch sizes actually drawn per call.
    pub fn batches_used(&self) -> BatchSizes {
        let b = self.batches;
        match self.kind {
            EstimatorKind::Exact => BatchSizes::NONE,
            EstimatorKind::Stochastic | EstimatorKind::HessianFree => b,
            EstimatorKind::FirstOrder => BatchSizes { hessian: 0, ..b },
        }
    }
}

/// Smoothness of `F_i`: `4L + alpha rho B`.
pub fn meta_smoothness(smoothness: f64, hessian_lipschitz: f64, grad_bound: f64, alpha: f64) -> f64 {
    4.0 * smoothness + alpha * hessian_lipschitz * grad_bound
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaGradSample {
    pub value: ParamVector,
    pub inner_point: ParamVector,
    pub batches_used: BatchSizes,
}

fn exact_grad_of<M: LossModel>(model: &M, w: &ParamVector) -> Result<ParamVector> {
    w.check_dim(model.dim(), "parameter")?;
    model
        .exact_grad(w)
        .ok_or_else(|| Error::Unsupported("model has no exact gradient oracle".into()))
}

fn exact_hvp_of<M: LossModel>(model: &M, w: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
    model
        .exact_hvp(w, v)
        .ok_or_else(|| Error::Unsupported("model has no exact Hessian-vector oracle".into()))
}

/// `F_i(w) = f_i(w - alpha grad f_i(w))`.
pub fn meta_loss<M: LossModel>(model: &M, w: &ParamVector, alpha: f64) -> Result<f64> {
    let g = exact_grad_of(model, w)?;
    let mut inner = w.clone();
    inner.axpy(-alpha, &g);
    model
        .exact_loss(&inner)
        .ok_or_else(|| Error::Unsupported("model has no exact loss oracle".into()))
}

/// `(I - alpha H(w)) grad f_i(w - alpha grad f_i(w))`.
pub fn meta_grad_exact<M: LossModel>(model: &M, w: &ParamVector, alpha: f64) -> Result<ParamVector> {
    let g = exact_grad_of(model, w)?;
    let mut inner = w.clone();
    inner.axpy(-alpha, &g);
    let v = exact_grad_of(model, &inner)?;
    let hv = exact_hvp_of(model, w, &v)?;
    let mut out = v;
    out.axpy(-alpha, &hv);
    Ok(out)
}

/// First stage: the adapted point `w~ = w - alpha g_in`, with `g_in` exact or
/// estimated from a size-`D` batch on the `InnerGrad` stream.
pub fn inner_point<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    rng: &RngStream,
) -> Result<ParamVector> {
    w.check_dim(model.dim(), "parameter")?;
    let g = match est.kind {
        EstimatorKind::Exact => exact_grad_of(model, w)?,
        _ => {
            let batch = draw_batch(model, est.batches.inner, &rng.child(Purpose::InnerGrad))?;
            batch_grad(model, w, &batch)?
        }
    };
    let mut inner = w.clone();
    inner.axpy(-est.alpha, &g);
    Ok(inner)
}

/// Second stage: the gradient estimate at `w` given the adapted point.
pub fn outer_direction<M: LossModel>(
    model: &M,
    w: &ParamVector,
    inner: &ParamVector,
    est: &MetaEstimator,
    rng: &RngStream,
) -> Result<ParamVector> {
    inner.check_dim(model.dim(), "adapted point")?;
    let alpha = est.alpha;
    let v = match est.kind {
        EstimatorKind::Exact => exact_grad_of(model, inner)?,
        _ => {
            let batch = draw_batch(model, est.batches.outer, &rng.child(Purpose::OuterGrad))?;
            batch_grad(model, inner, &batch)?
        }
    };
    let correction = match est.kind {
        EstimatorKind::FirstOrder => return Ok(v),
        EstimatorKind::Exact => exact_hvp_of(model, w, &v)?,
        EstimatorKind::Stochastic => {
            let batch = draw_batch(model, est.batches.hessian, &rng.child(Purpose::Hessian))?;
            batch_hvp(model, w, &v, &batch)?
        }
        EstimatorKind::HessianFree => {
            let delta = est.delta.unwrap_or(1e-3 / v.norm().max(1.0));
            let batch = draw_batch(model, est.batches.hessian, &rng.child(Purpose::Hessian))?;
            let mut plus = w.clone();
            plus.axpy(delta, &v);
            let mut minus = w.clone();
            minus.axpy(-delta, &v);
            let mut diff = batch_grad(model, &plus, &batch)?;
            diff -= &batch_grad(model, &minus, &batch)?;
            diff.scaled(1.0 / (2.0 * delta))
        }
    };
    let mut out = v;
    out.axpy(-alpha, &correction);
    Ok(out)
}

/// Gradient estimate of `F_i` at `w` using the estimator's kind.
pub fn estimate<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    rng: &RngStream,
) -> Result<MetaGradSample> {
    est.validate()?;
    let inner = inner_point(model, w, est, rng)?;
    let value = outer_direction(model, w, &inner, est, rng)?;
    value.ensure_finite("meta-gradient estimate")?;
    Ok(MetaGradSample {
        value,
        inner_point: inner,
        batches_used: est.batches_used(),
    })
}

fn estimate_kind<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    rng: &RngStream,
    kind: EstimatorKind,
) -> Result<MetaGradSample> {
    if est.kind != kind {
        return Err(invalid(format!(
            "estimator kind is {}, expected {}",
            est.kind.name(),
            kind.name()
        )));
    }
    estimate(model, w, est, rng)
}

/// Three independent batches: `(I - alpha H~(w, D'')) g~(w - alpha g~(w, D), D')`.
pub fn meta_grad_stochastic<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    rng: &RngStream,
) -> Result<MetaGradSample> {
    estimate_kind(model, w, est, rng, EstimatorKind::Stochastic)
}

/// Drops the second-order term: `g~(w - alpha g~(w, D), D')`.
pub fn meta_grad_fo<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    rng: &RngStream,
) -> Result<MetaGradSample> {
    estimate_kind(model, w, est, rng, EstimatorKind::FirstOrder)
}

/// Replaces the Hessian product by a symmetric gradient difference at
/// `w ± delta g~` on one batch `D''`.
pub fn meta_grad_hf<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    rng: &RngStream,
) -> Result<MetaGradSample> {
    estimate_kind(model, w, est, rng, EstimatorKind::HessianFree)
}

/// `w - beta * estimate(w)`.
pub fn local_update_step<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    beta: f64,
    rng: &RngStream,
) -> Result<ParamVector> {
    check_beta(beta)?;
    let g = estimate(model, w, est, rng)?.value;
    let mut next = w.clone();
    next.axpy(-beta, &g);
    Ok(next)
}

/// Same update computed as two explicit stages: the adapted point first, then
/// the step from `w` along the outer direction.
pub fn local_update_two_stage<M: LossModel>(
    model: &M,
    w: &ParamVector,
    est: &MetaEstimator,
    beta: f64,
    rng: &RngStream,
) -> Result<ParamVector> {
    check_beta(beta)?;
    est.validate()?;
    let adapted = inner_point(model, w, est, rng)?;
    let direction = outer_direction(model, w, &adapted, est, rng)?;
    direction.ensure_finite("meta-gradient estimate")?;
    let mut next = w.clone();
    next.axpy(-beta, &direction);
    Ok(next)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid("outer stepsize beta must be finite and nonnegative"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{finite_diff_grad, relative_error};
    use crate::objective::{linalg, CubicTask, QuadraticTask};

    fn scalar() -> QuadraticTask {
        QuadraticTask::diagonal(&[2.0], &[0.0]).unwrap()
    }

    fn one() -> ParamVector {
        ParamVector::new(vec![1.0]).unwrap()
    }

    fn random_quadratic(seed: u64, d: usize) -> QuadraticTask {
        let mut r = RngStream::new(seed).rng();
        let a = linalg::random_symmetric_unit(d, &mut r) * 0.8;
        let b = ParamVector::from_raw(linalg::gaussian_vector(d, &mut r));
        QuadraticTask::new(a, b, 0.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn closed_form_scalar_values() {
        let t = scalar();
        assert!((meta_loss(&t, &one(), 0.25).unwrap() - 0.25).abs() < 1e-15);
        assert!((meta_grad_exact(&t, &one(), 0.25).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((meta_loss(&t, &one(), 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((meta_grad_exact(&t, &one(), 0.0).unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let t = random_quadratic(seed, 5);
            let mut r = RngStream::new(100 + seed).rng();
            let w = linalg::unit_vector(5, &mut r).scaled(0.5);
            let g = meta_grad_exact(&t, &w, 0.3).unwrap();
            let fd = finite_diff_grad(|x| meta_loss(&t, x, 0.3), &w, 1e-5).unwrap();
            assert!(relative_error(&g, &fd) < 1e-6);
        }
    }

    #[test]
    fn noiseless_stochastic_and_hf_equal_exact() {
        let t = random_quadratic(7, 4);
        let w = ParamVector::new(vec![0.1, -0.3, 0.2, 0.4]).unwrap();
        let exact = meta_grad_exact(&t, &w, 0.5).unwrap();
        let rng = RngStream::new(3);
        let b = BatchSizes::new(3, 2, 5);
        let s = MetaEstimator::new(0.5, EstimatorKind::Stochastic, b).unwrap();
        assert!(meta_grad_stochastic(&t, &w, &s, &rng).unwrap().value.dist(&exact) < 1e-14);
        for delta in [1e-3, 1e-1, 1.0] {
            let h = MetaEstimator::new(0.5, EstimatorKind::HessianFree, b)
                .unwrap()
                .with_delta(delta)
                .unwrap();
            assert!(meta_grad_hf(&t, &w, &h, &rng).unwrap().value.dist(&exact) < 1e-12);
        }
    }

    #[test]
    fn first_order_gap_on_noiseless_quadratic() {
        let t = random_quadratic(9, 3);
        let w = ParamVector::new(vec![0.2, 0.1, -0.5]).unwrap();
        let alpha = 0.4;
        let est = MetaEstimator::new(alpha, EstimatorKind::FirstOrder, BatchSizes::uniform(2)).unwrap();
        let fo = meta_grad_fo(&t, &w, &est, &RngStream::new(1)).unwrap();
        let exact = meta_grad_exact(&t, &w, alpha).unwrap();
        let v = t.exact_grad(&fo.inner_point).unwrap();
        let expected = t.exact_hvp(&w, &v).unwrap().norm() * alpha;
        assert!((fo.value.dist(&exact) - expected).abs() < 1e-12);
        assert_eq!(fo.batches_used.hessian, 0);
    }

    #[test]
    fn inner_point_is_consistent() {
        let t = scalar().with_noise(0.5, 0.0);
        let est = MetaEstimator::new(0.25, EstimatorKind::Stochastic, BatchSizes::uniform(4)).unwrap();
        let rng = RngStream::new(2).round(3).client(1);
        let s = meta_grad_stochastic(&t, &one(), &est, &rng).unwrap();
        let batch = draw_batch(&t, 4, &rng.child(Purpose::InnerGrad)).unwrap();
        let g = batch_grad(&t, &one(), &batch).unwrap();
        assert_eq!(s.inner_point, &one() - &g.scaled(0.25));
    }

    #[test]
    fn one_shot_and_two_stage_are_bit_identical() {
        let t = random_quadratic(4, 3).with_noise(0.3, 0.2);
        let w = ParamVector::new(vec![0.3, 0.2, 0.1]).unwrap();
        for kind in EstimatorKind::ALL {
            let est = MetaEstimator::new(0.3, kind, BatchSizes::new(2, 3, 4)).unwrap();
            let rng = RngStream::new(11).round(2).client(5);
            let a = local_update_step(&t, &w, &est, 0.05, &rng).unwrap();
            let b = local_update_two_stage(&t, &w, &est, 0.05, &rng).unwrap();
            assert_eq!(a.as_slice(), b.as_slice());
        }
        let est = MetaEstimator::exact(0.3).unwrap();
        assert_eq!(local_update_step(&t, &w, &est, 0.0, &RngStream::new(0)).unwrap(), w);
    }

    #[test]
    fn exact_descent_is_monotone() {
        let t = random_quadratic(12, 4);
        let a = t.a() * t.a();
        let convex = QuadraticTask::new(a, t.b().clone(), 0.0, 0.0, 1.0).unwrap();
        let l = convex.smoothness();
        let alpha = 0.5 / l;
        let est = MetaEstimator::exact(alpha).unwrap();
        let beta = 1.0 / (4.0 * l);
        let mut w = ParamVector::new(vec![1.0, -1.0, 0.5, 0.0]).unwrap();
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let g = meta_grad_exact(&convex, &w, alpha).unwrap().norm();
            assert!(g <= prev + 1e-15);
            prev = g;
            w = local_update_step(&convex, &w, &est, beta, &RngStream::new(0)).unwrap();
        }
    }

    #[test]
    fn hf_bias_grows_linearly_on_cubic() {
        let a = linalg::random_symmetric_unit(3, &mut RngStream::new(5).rng()) * 0.5;
        let t = CubicTask::new(a, ParamVector::new(vec![0.2, -0.1, 0.3]).unwrap(), 1.0, 0.0, 1.0).unwrap();
        let w = ParamVector::new(vec![0.4, 0.1, -0.2]).unwrap();
        let exact = meta_grad_exact(&t, &w, 0.3).unwrap();
        let c = t.constants();
        let slope_bound = 0.3 * c.hessian_lipschitz.unwrap() * c.grad_bound.unwrap().powi(2);
        let mut biases = Vec::new();
        for delta in [1e-3, 1e-2, 1e-1] {
            let est = MetaEstimator::new(0.3, EstimatorKind::HessianFree, BatchSizes::uniform(1))
                .unwrap()
                .with_delta(delta)
                .unwrap();
            let bias = meta_grad_hf(&t, &w, &est, &RngStream::new(0)).unwrap().value.dist(&exact);
            assert!(bias <= slope_bound * delta);
            biases.push(bias);
        }
        assert!(biases[0] < biases[1] && biases[1] < biases[2]);
    }

    #[test]
    fn validation() {
        assert!(MetaEstimator::new(0.1, EstimatorKind::Stochastic, BatchSizes::new(0, 1, 1)).is_err());
        assert!(MetaEstimator::new(0.1, EstimatorKind::FirstOrder, BatchSizes::new(1, 1, 0)).is_ok());
        let hf = MetaEstimator::new(0.1, EstimatorKind::HessianFree, BatchSizes::uniform(1)).unwrap();
        assert!(hf.with_delta(0.0).is_err());
        assert!(hf.with_delta(-1.0).is_err());
        let est = MetaEstimator::exact(0.6).unwrap();
        assert!(matches!(est.check_smoothness(Some(2.0)), Err(Error::HypothesisViolation(_))));
        assert!(est.check_smoothness(None).is_ok());
        assert!(meta_grad_fo(&scalar(), &one(), &est, &RngStream::new(0)).is_err());
        assert_eq!("HF".parse::<EstimatorKind>().unwrap(), EstimatorKind::HessianFree);
    }
}
