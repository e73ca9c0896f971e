use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{ParamVector, Purpose, RngStream};
use crate::objective::{linalg, LossModel};

use super::distance::{tv_distance, wasserstein1, DiscreteDistribution};

/// Number of random unit directions used for the Hessian dissimilarity.
pub const DEFAULT_HVP_PROBES: usize = 20;

/// Empirical `(gamma_G^2, gamma_H^2)`: the largest
/// `(1/n) sum_i ||grad f_i - grad f||^2` over the probe points, and the largest
/// `(1/n) sum_i ||(H_i - H) v||^2` over probe points and `hvp_probes` random
/// unit `v`. The Hessian value is a lower bound on the operator-norm quantity.
pub fn estimate_gamma<M: LossModel>(
    models: &[M],
    probe_points: &[ParamVector],
    hvp_probes: usize,
    rng: &RngStream,
) -> Result<(f64, f64)> {
    let first = models.first().ok_or_else(|| invalid("no users"))?;
    if probe_points.is_empty() {
        return Err(invalid("need at least one probe point"));
    }
    let d = first.dim();
    let n = models.len() as f64;
    let no_oracle = || Error::Unsupported("gamma estimation needs exact gradient and Hessian-vector oracles".into());
    let mut best_g = 0.0f64;
    let mut best_h = 0.0f64;
    for (k, w) in probe_points.iter().enumerate() {
        w.check_dim(d, "probe point")?;
        let grads = models
            .iter()
            .map(|m| m.exact_grad(w).ok_or_else(no_oracle))
            .collect::<Result<Vec<_>>>()?;
        let mean = ParamVector::mean(&grads).expect("nonempty");
        best_g = best_g.max(grads.iter().map(|g| g.dist(&mean).powi(2)).sum::<f64>() / n);

        let mut r = rng.child(Purpose::Probe).child(Purpose::Custom(k as u64)).rng();
        for _ in 0..hvp_probes {
            let v = linalg::unit_vector(d, &mut r);
            let hvs = models
                .iter()
                .map(|m| m.exact_hvp(w, &v).ok_or_else(no_oracle))
                .collect::<Result<Vec<_>>>()?;
            let mean = ParamVector::mean(&hvs).expect("nonempty");
            best_h = best_h.max(hvs.iter().map(|h| h.dist(&mean).powi(2)).sum::<f64>() / n);
        }
    }
    Ok((best_g, best_h))
}

fn mean_sq(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

/// `||p_i - p||_TV` for each user, with `p` the equal-weight mixture.
pub fn tv_to_mixture<P: Clone + PartialEq>(dists: &[DiscreteDistribution<P>]) -> Result<Vec<f64>> {
    let p = DiscreteDistribution::mixture(dists)?;
    Ok(dists.iter().map(|q| tv_distance(q, &p)).collect())
}

/// `W_1(p_i, p)` for each user under `metric`.
pub fn w1_to_mixture<P, D>(dists: &[DiscreteDistribution<P>], metric: D) -> Result<Vec<f64>>
where
    P: Clone + PartialEq,
    D: Fn(&P, &P) -> f64,
{
    let p = DiscreteDistribution::mixture(dists)?;
    dists.iter().map(|q| wasserstein1(q, &p, &metric)).collect()
}

/// `(4 B^2 s, 4 L^2 s)` with `s = (1/n) sum_i ||p_i - p||_TV^2`.
pub fn tv_gamma_bound<P: Clone + PartialEq>(
    dists: &[DiscreteDistribution<P>],
    grad_bound: f64,
    smoothness: f64,
) -> Result<(f64, f64)> {
    let s = mean_sq(&tv_to_mixture(dists)?);
    Ok((4.0 * grad_bound.powi(2) * s, 4.0 * smoothness.powi(2) * s))
}

/// `(L_Z^2 s, rho_Z^2 s)` with `s = (1/n) sum_i W_1(p_i, p)^2`.
pub fn w1_gamma_bound<P, D>(
    dists: &[DiscreteDistribution<P>],
    grad_data_lipschitz: f64,
    hess_data_lipschitz: f64,
    metric: D,
) -> Result<(f64, f64)>
where
    P: Clone + PartialEq,
    D: Fn(&P, &P) -> f64,
{
    let s = mean_sq(&w1_to_mixture(dists, metric)?);
    Ok((grad_data_lipschitz.powi(2) * s, hess_data_lipschitz.powi(2) * s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub gamma_g2: f64,
    pub gamma_h2: f64,
    /// The Hessian value came from random probes rather than an exact norm.
    pub gamma_h2_is_lower_bound: bool,
    pub tv: Vec<f64>,
    pub w1: Option<Vec<f64>>,
    pub tv_bound: Option<(f64, f64)>,
    pub w1_bound: Option<(f64, f64)>,
}

impl SimilarityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
