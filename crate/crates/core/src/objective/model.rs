use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::{ParamVector, RngStream, StreamRng};

/// Analytic constants a model declares about its per-user objective. `None`
/// means unknown; bound checks that need an unknown constant refuse to run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    /// Gradient-norm bound `B` on the declared domain.
    pub grad_bound: Option<f64>,
    /// Smoothness `L`.
    pub smoothness: Option<f64>,
    /// Hessian Lipschitz constant `rho`.
    pub hessian_lipschitz: Option<f64>,
    /// Per-sample gradient standard deviation bound `sigma_G`.
    pub grad_std: Option<f64>,
    /// Per-sample Hessian standard deviation bound `sigma_H`.
    pub hess_std: Option<f64>,
    /// Radius of the ball (around the origin) on which the constants hold.
    pub domain_radius: Option<f64>,
}

impl ModelConstants {
    /// Federation-wide constants: the largest value of each constant over the
    /// users, unknown if any user leaves it unknown.
    pub fn merge_max<'a>(items: impl IntoIterator<Item = &'a ModelConstants>) -> ModelConstants {
        fn join(a: Option<f64>, b: Option<f64>) -> Option<f64> {
            Some(a?.max(b?))
        }
        let mut it = items.into_iter();
        let Some(first) = it.next() else {
            return ModelConstants::default();
        };
        it.fold(*first, |acc, c| ModelConstants {
            grad_bound: join(acc.grad_bound, c.grad_bound),
            smoothness: join(acc.smoothness, c.smoothness),
            hessian_lipschitz: join(acc.hessian_lipschitz, c.hessian_lipschitz),
            grad_std: join(acc.grad_std, c.grad_std),
            hess_std: join(acc.hess_std, c.hess_std),
            domain_radius: join(acc.domain_radius, c.domain_radius),
        })
    }
}

/// A user's task: per-sample loss, gradient and Hessian-vector product, a
/// sampler for its data distribution, and optional exact oracles for the
/// population objective.
pub trait LossModel: Send + Sync {
    type Sample: Clone + Send + Sync;

    fn dim(&self) -> usize;

    fn loss(&self, sample: &Self::Sample, w: &ParamVector) -> f64;

    fn grad_sample(&self, sample: &Self::Sample, w: &ParamVector) -> ParamVector;

    fn hvp_sample(&self, sample: &Self::Sample, w: &ParamVector, v: &ParamVector) -> ParamVector;

    /// One i.i.d. draw from the user's data distribution.
    fn draw_sample(&self, rng: &mut StreamRng) -> Self::Sample;

    fn exact_loss(&self, _w: &ParamVector) -> Option<f64> {
        None
    }

    fn exact_grad(&self, _w: &ParamVector) -> Option<ParamVector> {
        None
    }

    fn exact_hvp(&self, _w: &ParamVector, _v: &ParamVector) -> Option<ParamVector> {
        None
    }

    fn constants(&self) -> ModelConstants {
        ModelConstants::default()
    }
}

/// Nonempty batch of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<S>(Vec<S>);

impl<S> Batch<S> {
    pub fn new(samples: Vec<S>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("batch must contain at least one sample"));
        }
        Ok(Self(samples))
    }

    pub fn samples(&self) -> &[S] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_samples(self) -> Vec<S> {
        self.0
    }
}

impl<S: Clone> Batch<S> {
    /// Concatenation `self ∪ other` (as a multiset).
    pub fn union(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }
}

/// Draws `size` i.i.d. samples from the stream.
pub fn draw_batch<M: LossModel>(model: &M, size: usize, rng: &RngStream) -> Result<Batch<M::Sample>> {
    if size == 0 {
        return Err(invalid("batch size must be positive"));
    }
    let mut r = rng.rng();
    Batch::new((0..size).map(|_| model.draw_sample(&mut r)).collect())
}

/// Mean per-sample loss over the batch.
pub fn batch_loss<M: LossModel>(model: &M, w: &ParamVector, batch: &Batch<M::Sample>) -> Result<f64> {
    w.check_dim(model.dim(), "parameter")?;
    let total: f64 = batch.samples().iter().map(|s| model.loss(s, w)).sum();
    Ok(total / batch.len() as f64)
}

/// Unbiased gradient estimate `(1/|D|) sum grad_sample`.
pub fn batch_grad<M: LossModel>(
    model: &M,
    w: &ParamVector,
    batch: &Batch<M::Sample>,
) -> Result<ParamVector> {
    w.check_dim(model.dim(), "parameter")?;
    let mut acc = ParamVector::zeros(model.dim());
    for s in batch.samples() {
        acc += &model.grad_sample(s, w);
    }
    acc.scale(1.0 / batch.len() as f64);
    Ok(acc)
}

/// Unbiased Hessian-vector product estimate `(1/|D''|) sum hvp_sample`.
pub fn batch_hvp<M: LossModel>(
    model: &M,
    w: &ParamVector,
    v: &ParamVector,
    batch: &Batch<M::Sample>,
) -> Result<ParamVector> {
    w.check_dim(model.dim(), "parameter")?;
    v.check_dim(model.dim(), "direction")?;
    let mut acc = ParamVector::zeros(model.dim());
    for s in batch.samples() {
        acc += &model.hvp_sample(s, w, v);
    }
    acc.scale(1.0 / batch.len() as f64);
    Ok(acc)
}
