use rand::Rng;

use super::constants::{
    estimator_bounds, estimator_symbols, gamma_f_sq, meta_smoothness_bound, drift_bounds, ConstantSet, Symbol,
};
use super::report::BoundReport;
use crate::error::{invalid, Error, Result};
use crate::federation::RoundRecord;
use crate::kernel::{chunked_reduce, ParamVector, Purpose, RngStream};
use crate::metagrad::{self, EstimatorKind, MetaEstimator};
use crate::objective::linalg::{self, Matrix};
use crate::objective::{LossModel, QuadraticTask};

/// One-sided 99% normal quantile.
pub const Z99: f64 = 2.326;

/// Monte-Carlo runs below this size carry a warning.
pub const MIN_TRIALS: usize = 1000;

/// Point `w` drawn uniformly from the ball of radius `radius`.
pub fn uniform_in_ball(dim: usize, radius: f64, rng: &RngStream) -> ParamVector {
    let mut r = rng.rng();
    let dir = linalg::unit_vector(dim, &mut r);
    let u: f64 = r.random();
    dir.scaled(radius * u.powf(1.0 / dim as f64))
}

/// `count` probe points uniform in the ball, on the `Probe` stream.
pub fn ball_probes(dim: usize, radius: f64, count: usize, rng: &RngStream) -> Vec<ParamVector> {
    let base = rng.child(Purpose::Probe);
    (0..count)
        .map(|i| uniform_in_ball(dim, radius, &base.child(Purpose::Trial(i as u64))))
        .collect()
}

/// Monte-Carlo moments of an estimator's error at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMoments {
    pub trials: usize,
    pub mean_error: ParamVector,
    /// `||mean error||`.
    pub bias: f64,
    /// `||mean error|| + z sqrt(tr Cov / N)`.
    pub bias_upper: f64,
    pub mse: f64,
    /// `mse + z sd(||e||^2) / sqrt(N)`.
    pub mse_upper: f64,
}

struct MomentAcc {
    sum: ParamVector,
    sum_sq: ParamVector,
    e2: f64,
    e4: f64,
}

/// Error moments of `est` against the exact meta-gradient at `w`. Trial `t`
/// uses the stream `rng.child(Trial(t))`.
pub fn estimator_moments<M: LossModel>(
    model: &M,
    est: &MetaEstimator,
    w: &ParamVector,
    trials: usize,
    rng: &RngStream,
) -> Result<ErrorMoments> {
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    est.validate()?;
    let exact = metagrad::meta_grad_exact(model, w, est.alpha)?;
    let dim = exact.dim();
    // Fail early on a bad configuration rather than inside the workers.
    metagrad::estimate(model, w, est, &rng.child(Purpose::Trial(0)))?;
    let acc = chunked_reduce(
        trials,
        || MomentAcc {
            sum: ParamVector::zeros(dim),
            sum_sq: ParamVector::zeros(dim),
            e2: 0.0,
            e4: 0.0,
        },
        |acc, t| {
            let g = metagrad::estimate(model, w, est, &rng.child(Purpose::Trial(t)))
                .expect("validated on trial 0")
                .value;
            let e = &g - &exact;
            for ((s, q), x) in acc
                .sum
                .as_mut_slice()
                .iter_mut()
                .zip(acc.sum_sq.as_mut_slice())
                .zip(e.as_slice())
            {
                *s += x;
                *q += x * x;
            }
            let n2 = e.norm_sq();
            acc.e2 += n2;
            acc.e4 += n2 * n2;
        },
        |mut a, b| {
            a.sum += &b.sum;
            a.sum_sq += &b.sum_sq;
            a.e2 += b.e2;
            a.e4 += b.e4;
            a
        },
    );
    let n = trials as f64;
    let mean_error = acc.sum.scaled(1.0 / n);
    let trace_cov: f64 = acc
        .sum_sq
        .as_slice()
        .iter()
        .zip(mean_error.as_slice())
        .map(|(q, m)| ((q - n * m * m) / (n - 1.0)).max(0.0))
        .sum();
    let mse = acc.e2 / n;
    let var_e2 = ((acc.e4 - n * mse * mse) / (n - 1.0)).max(0.0);
    let bias = mean_error.norm();
    Ok(ErrorMoments {
        trials,
        bias,
        bias_upper: bias + Z99 * (trace_cov / n).sqrt(),
        mse,
        mse_upper: mse + Z99 * (var_e2 / n).sqrt(),
        mean_error,
    })
}

/// Bias and mean-squared-error reports for `est` at `w`, against the bounds
/// for the estimator's kind.
pub fn check_estimator_moments<M: LossModel>(
    model: &M,
    est: &MetaEstimator,
    w: &ParamVector,
    trials: usize,
    rng: &RngStream,
    c: &ConstantSet,
) -> Result<(BoundReport, BoundReport)> {
    c.validate()?;
    let (bias_bound, mse_bound) = estimator_bounds(c, est.kind)?;
    let m = estimator_moments(model, est, w, trials, rng)?;
    let warning = (trials < MIN_TRIALS).then(|| format!("only {trials} Monte-Carlo trials"));
    let used = c.uses(&estimator_symbols(est.kind));
    let kind = est.kind.name();
    Ok((
        BoundReport::new(format!("{kind}_bias"), bias_bound, m.bias, Some(m.bias_upper))
            .with_constants(used.clone())
            .with_warning(warning.clone()),
        BoundReport::new(format!("{kind}_mse"), mse_bound, m.mse, Some(m.mse_upper))
            .with_constants(used)
            .with_warning(warning),
    ))
}

/// Largest `||grad F_i(w1) - grad F_i(w2)|| / ||w1 - w2||` over `trials`
/// pairs drawn uniformly in the ball of radius `radius`; pair `j` uses model
/// `j mod n`.
pub fn max_meta_lipschitz_ratio<M: LossModel>(
    models: &[M],
    alpha: f64,
    radius: f64,
    trials: usize,
    rng: &RngStream,
) -> Result<f64> {
    if models.is_empty() || trials == 0 {
        return Err(invalid("need at least one model and one trial"));
    }
    let dim = models[0].dim();
    let mut worst = 0.0f64;
    for j in 0..trials {
        let model = &models[j % models.len()];
        let s = rng.child(Purpose::Trial(j as u64));
        let w1 = uniform_in_ball(dim, radius, &s.child(Purpose::Custom(0)));
        let w2 = uniform_in_ball(dim, radius, &s.child(Purpose::Custom(1)));
        let gap = w1.dist(&w2);
        if gap == 0.0 {
            continue;
        }
        let g1 = metagrad::meta_grad_exact(model, &w1, alpha)?;
        let g2 = metagrad::meta_grad_exact(model, &w2, alpha)?;
        worst = worst.max(g1.dist(&g2) / gap);
    }
    Ok(worst)
}

/// Measured meta-gradient Lipschitz ratio against `L_F = 4L + alpha rho B`.
/// Pairs are drawn in the ball of radius `radius` from `c`.
pub fn check_smoothness<M: LossModel>(
    models: &[M],
    c: &ConstantSet,
    trials: usize,
    rng: &RngStream,
) -> Result<BoundReport> {
    c.validate()?;
    let lf = meta_smoothness_bound(c)?;
    let ratio = max_meta_lipschitz_ratio(models, c.get(Symbol::Alpha)?, c.get(Symbol::Radius)?, trials, rng)?;
    Ok(BoundReport::new("meta_smoothness", lf, ratio, None)
        .with_constants(c.uses(&[Symbol::L, Symbol::Rho, Symbol::B, Symbol::Alpha, Symbol::Radius])))
}

/// `||(I - alpha A) A (I - alpha A)||_2`, the Hessian norm of `F_i` for a
/// quadratic task.
pub fn quadratic_meta_hessian_norm(task: &QuadraticTask, alpha: f64) -> f64 {
    let a = task.a();
    let d = a.nrows();
    let m: Matrix = Matrix::identity(d, d) - a * alpha;
    linalg::spectral_norm(&(&m * a * &m))
}

/// `(1/n) sum_i ||grad F_i(w) - grad F(w)||^2`.
pub fn meta_dissimilarity_at<M: LossModel>(models: &[M], w: &ParamVector, alpha: f64) -> Result<f64> {
    if models.is_empty() {
        return Err(invalid("no models"));
    }
    let grads = models
        .iter()
        .map(|m| metagrad::meta_grad_exact(m, w, alpha))
        .collect::<Result<Vec<_>>>()?;
    let mean = ParamVector::mean(&grads).expect("nonempty");
    Ok(grads.iter().map(|g| g.dist(&mean).powi(2)).sum::<f64>() / grads.len() as f64)
}

/// Largest meta-gradient dissimilarity over `probes` against `gamma_F^2`.
pub fn check_gamma_f<M: LossModel>(models: &[M], c: &ConstantSet, probes: &[ParamVector]) -> Result<BoundReport> {
    c.validate()?;
    if probes.is_empty() {
        return Err(invalid("no probe points"));
    }
    let bound = gamma_f_sq(c)?;
    let alpha = c.get(Symbol::Alpha)?;
    let mut worst = 0.0f64;
    for w in probes {
        worst = worst.max(meta_dissimilarity_at(models, w, alpha)?);
    }
    Ok(BoundReport::new("meta_dissimilarity", bound, worst, None).with_constants(c.uses(&[
        Symbol::B,
        Symbol::Alpha,
        Symbol::GammaG,
        Symbol::GammaH,
    ])))
}

/// Drift moments averaged over independent runs against the local-drift
/// bounds, one pair of reports per `(k, t)`. Every record must carry drift
/// statistics over all `n` users.
pub fn check_drift(histories: &[Vec<RoundRecord>], c: &ConstantSet, kind: EstimatorKind) -> Result<Vec<BoundReport>> {
    c.validate()?;
    let first = histories.first().ok_or_else(|| invalid("no histories"))?;
    let n = c.get(Symbol::N)? as usize;
    let tau = c.get(Symbol::Tau)? as usize;
    let rounds = first.len();
    for h in histories {
        if h.len() != rounds {
            return Err(invalid("histories differ in length"));
        }
        for rec in h {
            if rec.drift_users != n || rec.drift.len() != tau + 1 {
                return Err(Error::Unsupported(format!(
                    "round {} has drift over {} of {n} users; run with all traces materialized",
                    rec.round, rec.drift_users
                )));
            }
        }
    }
    let mut symbols = estimator_symbols(kind);
    symbols.extend([Symbol::GammaG, Symbol::GammaH, Symbol::Tau, Symbol::N]);
    let used = c.uses(&symbols);
    let runs = histories.len() as f64;
    let mut out = Vec::with_capacity(2 * rounds * (tau + 1));
    for k in 0..rounds {
        let beta = first[k].beta;
        for t in 0..=tau {
            let (b1, b2) = drift_bounds(c, kind, beta, t)?;
            let m1 = histories.iter().map(|h| h[k].drift[t].mean_norm).sum::<f64>() / runs;
            let m2 = histories.iter().map(|h| h[k].drift[t].mean_sq_norm).sum::<f64>() / runs;
            out.push(BoundReport::new(format!("drift_first[k={k},t={t}]"), b1, m1, None).with_constants(used.clone()));
            out.push(BoundReport::new(format!("drift_second[k={k},t={t}]"), b2, m2, None).with_constants(used.clone()));
        }
    }
    Ok(out)
}

/// `(1/(tau K)) sum_k sum_t ||grad F(w_bar_{k+1,t})||^2` from a history
/// recorded with stationarity at every local step.
pub fn average_stationarity(history: &[RoundRecord], tau: usize) -> Result<f64> {
    if history.is_empty() {
        return Err(invalid("empty history"));
    }
    let mut total = 0.0;
    for rec in history {
        if rec.stationarity.len() != tau {
            return Err(Error::Unsupported(format!(
                "round {} has {} stationarity entries, expected {tau}",
                rec.round,
                rec.stationarity.len()
            )));
        }
        total += rec.stationarity.iter().map(|(_, v)| v).sum::<f64>();
    }
    Ok(total / (tau * history.len()) as f64)
}

/// Exact `E ||mean_{i in A} a_i - mu||^2` over all `m`-subsets, by enumeration.
pub fn subset_variance_exact(values: &[ParamVector], m: usize) -> Result<f64> {
    let n = values.len();
    if n == 0 || m == 0 || m > n {
        return Err(invalid(format!("subset size {m} outside 1..={n}")));
    }
    if n > 24 {
        return Err(invalid("enumeration limited to 24 values"));
    }
    let mu = ParamVector::mean(values).expect("nonempty");
    let (mut total, mut count) = (0.0, 0usize);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let mut acc = ParamVector::zeros(mu.dim());
        for (i, v) in values.iter().enumerate() {
            if mask & (1 << i) != 0 {
                acc += v;
                acc -= &mu;
            }
        }
        total += acc.norm_sq() / (m * m) as f64;
        count += 1;
    }
    Ok(total / count as f64)
}

/// `(1/n) sum_i ||a_i - mu||^2`.
pub fn population_variance(values: &[ParamVector]) -> Result<f64> {
    let mu = ParamVector::mean(values).ok_or_else(|| invalid("no values"))?;
    Ok(values.iter().map(|v| v.dist(&mu).powi(2)).sum::<f64>() / values.len() as f64)
}
