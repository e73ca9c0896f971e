use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::{FederationConfig, StepSchedule};
use crate::metagrad::{EstimatorKind, MetaEstimator};
use crate::objective::ModelConstants;

/// Where a constant's value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Declared,
    Estimated,
}

/// Symbols appearing in the bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    B,
    L,
    Rho,
    SigmaG,
    SigmaH,
    GammaG,
    GammaH,
    Alpha,
    Beta,
    Tau,
    K,
    N,
    R,
    D,
    DOuter,
    DHessian,
    Delta,
    Radius,
}

impl Symbol {
    pub const ALL: [Symbol; 18] = [
        Symbol::B,
        Symbol::L,
        Symbol::Rho,
        Symbol::SigmaG,
        Symbol::SigmaH,
        Symbol::GammaG,
        Symbol::GammaH,
        Symbol::Alpha,
        Symbol::Beta,
        Symbol::Tau,
        Symbol::K,
        Symbol::N,
        Symbol::R,
        Symbol::D,
        Symbol::DOuter,
        Symbol::DHessian,
        Symbol::Delta,
        Symbol::Radius,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Symbol::B => "B",
            Symbol::L => "L",
            Symbol::Rho => "rho",
            Symbol::SigmaG => "sigma_G",
            Symbol::SigmaH => "sigma_H",
            Symbol::GammaG => "gamma_G",
            Symbol::GammaH => "gamma_H",
            Symbol::Alpha => "alpha",
            Symbol::Beta => "beta",
            Symbol::Tau => "tau",
            Symbol::K => "K",
            Symbol::N => "n",
            Symbol::R => "r",
            Symbol::D => "D",
            Symbol::DOuter => "D'",
            Symbol::DHessian => "D''",
            Symbol::Delta => "delta",
            Symbol::Radius => "radius",
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tagged {
    pub value: f64,
    pub provenance: Provenance,
}

/// One constant as it entered a bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantUse {
    pub symbol: String,
    pub value: f64,
    pub provenance: Provenance,
}

/// The constants the bounds are assembled from, each tagged with its origin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstantSet {
    values: BTreeMap<Symbol, Tagged>,
}

impl ConstantSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `symbol`. Values must be finite and nonnegative.
    pub fn set(&mut self, symbol: Symbol, value: f64, provenance: Provenance) -> Result<&mut Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "constant {symbol} must be finite and nonnegative, got {value}"
            )));
        }
        self.values.insert(symbol, Tagged { value, provenance });
        Ok(self)
    }

    pub fn with(mut self, symbol: Symbol, value: f64, provenance: Provenance) -> Result<Self> {
        self.set(symbol, value, provenance)?;
        Ok(self)
    }

    pub fn declared(self, symbol: Symbol, value: f64) -> Result<Self> {
        self.with(symbol, value, Provenance::Declared)
    }

    pub fn remove(&mut self, symbol: Symbol) {
        self.values.remove(&symbol);
    }

    pub fn tagged(&self, symbol: Symbol) -> Option<Tagged> {
        self.values.get(&symbol).copied()
    }

    pub fn get(&self, symbol: Symbol) -> Result<f64> {
        self.values
            .get(&symbol)
            .map(|t| t.value)
            .ok_or(Error::MissingConstant(symbol.name()))
    }

    pub fn is_estimated(&self, symbols: &[Symbol]) -> bool {
        symbols
            .iter()
            .any(|s| matches!(self.tagged(*s), Some(Tagged { provenance: Provenance::Estimated, .. })))
    }

    pub fn uses(&self, symbols: &[Symbol]) -> Vec<ConstantUse> {
        symbols
            .iter()
            .filter_map(|&s| {
                self.tagged(s).map(|t| ConstantUse {
                    symbol: s.name().to_string(),
                    value: t.value,
                    provenance: t.provenance,
                })
            })
            .collect()
    }

    /// Copies the known model constants.
    pub fn with_model(mut self, c: &ModelConstants, provenance: Provenance) -> Result<Self> {
        let pairs = [
            (Symbol::B, c.grad_bound),
            (Symbol::L, c.smoothness),
            (Symbol::Rho, c.hessian_lipschitz),
            (Symbol::SigmaG, c.grad_std),
            (Symbol::SigmaH, c.hess_std),
            (Symbol::Radius, c.domain_radius),
        ];
        for (s, v) in pairs {
            if let Some(v) = v {
                self.set(s, v, provenance)?;
            }
        }
        Ok(self)
    }

    /// Copies `alpha`, the batch sizes and an explicit `delta`.
    pub fn with_estimator(mut self, est: &MetaEstimator) -> Result<Self> {
        let b = est.batches;
        self.set(Symbol::Alpha, est.alpha, Provenance::Declared)?;
        self.set(Symbol::D, b.inner as f64, Provenance::Declared)?;
        self.set(Symbol::DOuter, b.outer as f64, Provenance::Declared)?;
        self.set(Symbol::DHessian, b.hessian as f64, Provenance::Declared)?;
        if let Some(d) = est.delta {
            self.set(Symbol::Delta, d, Provenance::Declared)?;
        }
        Ok(self)
    }

    /// Copies `n, r, tau, K` and, for a constant schedule, `beta`.
    pub fn with_federation(mut self, cfg: &FederationConfig) -> Result<Self> {
        self.set(Symbol::N, cfg.n as f64, Provenance::Declared)?;
        self.set(Symbol::R, cfg.r, Provenance::Declared)?;
        self.set(Symbol::Tau, cfg.tau as f64, Provenance::Declared)?;
        self.set(Symbol::K, cfg.rounds as f64, Provenance::Declared)?;
        if let StepSchedule::Constant { beta } = cfg.schedule {
            self.set(Symbol::Beta, beta, Provenance::Declared)?;
        }
        self.with_estimator(&cfg.estimator)
    }

    pub fn with_gamma(mut self, gamma_g: f64, gamma_h: f64, provenance: Provenance) -> Result<Self> {
        self.set(Symbol::GammaG, gamma_g, provenance)?;
        self.set(Symbol::GammaH, gamma_h, provenance)?;
        Ok(self)
    }

    /// Checks `alpha L <= 1` when both are known.
    pub fn validate(&self) -> Result<()> {
        if let (Ok(a), Ok(l)) = (self.get(Symbol::Alpha), self.get(Symbol::L)) {
            if a * l > 1.0 + 1e-12 {
                return Err(Error::HypothesisViolation(format!("alpha L <= 1 required, got {}", a * l)));
            }
        }
        Ok(())
    }
}

/// `L_F = 4L + alpha rho B`.
pub fn meta_smoothness_bound(c: &ConstantSet) -> Result<f64> {
    Ok(4.0 * c.get(Symbol::L)? + c.get(Symbol::Alpha)? * c.get(Symbol::Rho)? * c.get(Symbol::B)?)
}

/// Bias bound of the second-order stochastic estimator, `2 alpha L sigma_G / sqrt(D)`.
pub fn stochastic_bias_bound(c: &ConstantSet) -> Result<f64> {
    let (a, l, s, d) = (c.get(Symbol::Alpha)?, c.get(Symbol::L)?, c.get(Symbol::SigmaG)?, c.get(Symbol::D)?);
    Ok(2.0 * a * l * s / d.sqrt())
}

/// `sigma_F^2`, evaluated as `12 [B^2 T + S (1 + T)]` with
/// `S = sigma_G^2 (1/D' + (alpha L)^2 / D)` and `T = sigma_H^2 alpha^2 / (4 D'')`.
/// Algebraically equal to `12 [B^2 + S][1 + T] - 12 B^2` and never negative.
pub fn sigma_f_sq(c: &ConstantSet) -> Result<f64> {
    let b = c.get(Symbol::B)?;
    let a = c.get(Symbol::Alpha)?;
    let l = c.get(Symbol::L)?;
    let sg = c.get(Symbol::SigmaG)?;
    let sh = c.get(Symbol::SigmaH)?;
    let (d, d1, d2) = (c.get(Symbol::D)?, c.get(Symbol::DOuter)?, c.get(Symbol::DHessian)?);
    let s = sg * sg * (1.0 / d1 + (a * l).powi(2) / d);
    let t = sh * sh * a * a / (4.0 * d2);
    Ok(12.0 * (b * b * t + s * (1.0 + t)))
}

/// `gamma_F^2 = 3 B^2 alpha^2 gamma_H^2 + 192 gamma_G^2`.
pub fn gamma_f_sq(c: &ConstantSet) -> Result<f64> {
    let b = c.get(Symbol::B)?;
    let a = c.get(Symbol::Alpha)?;
    let gg = c.get(Symbol::GammaG)?;
    let gh = c.get(Symbol::GammaH)?;
    Ok(3.0 * b * b * a * a * gh * gh + 192.0 * gg * gg)
}

/// `m_F^FO = alpha L (sigma_G / sqrt(D) + B)`.
pub fn fo_bias_bound(c: &ConstantSet) -> Result<f64> {
    let (a, l, s, d, b) = (
        c.get(Symbol::Alpha)?,
        c.get(Symbol::L)?,
        c.get(Symbol::SigmaG)?,
        c.get(Symbol::D)?,
        c.get(Symbol::B)?,
    );
    Ok(a * l * (s / d.sqrt() + b))
}

/// `2 sigma_G^2 (1/D' + (alpha L)^2 / D) + 2 (alpha L B)^2`.
pub fn fo_mse_bound(c: &ConstantSet) -> Result<f64> {
    let (a, l, s, b) = (c.get(Symbol::Alpha)?, c.get(Symbol::L)?, c.get(Symbol::SigmaG)?, c.get(Symbol::B)?);
    let (d, d1) = (c.get(Symbol::D)?, c.get(Symbol::DOuter)?);
    Ok(2.0 * s * s * (1.0 / d1 + (a * l).powi(2) / d) + 2.0 * (a * l * b).powi(2))
}

/// `m_F^HF = alpha (2 L sigma_G / sqrt(D) + L sigma_G / sqrt(D') + rho delta B^2)`.
pub fn hf_bias_bound(c: &ConstantSet) -> Result<f64> {
    let (a, l, s, r, b) = (
        c.get(Symbol::Alpha)?,
        c.get(Symbol::L)?,
        c.get(Symbol::SigmaG)?,
        c.get(Symbol::Rho)?,
        c.get(Symbol::B)?,
    );
    let (d, d1, delta) = (c.get(Symbol::D)?, c.get(Symbol::DOuter)?, c.get(Symbol::Delta)?);
    Ok(a * (2.0 * l * s / d.sqrt() + l * s / d1.sqrt() + r * delta * b * b))
}

/// `6 sigma_G^2 (2 (alpha L)^2 / D + 2 / D' + alpha^2 / (2 delta^2 D'')) + 2 (alpha rho delta)^2 B^4`.
pub fn hf_mse_bound(c: &ConstantSet) -> Result<f64> {
    let (a, l, s, r, b) = (
        c.get(Symbol::Alpha)?,
        c.get(Symbol::L)?,
        c.get(Symbol::SigmaG)?,
        c.get(Symbol::Rho)?,
        c.get(Symbol::B)?,
    );
    let (d, d1, d2, delta) = (
        c.get(Symbol::D)?,
        c.get(Symbol::DOuter)?,
        c.get(Symbol::DHessian)?,
        c.get(Symbol::Delta)?,
    );
    if delta == 0.0 {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    Ok(6.0 * s * s * (2.0 * (a * l).powi(2) / d + 2.0 / d1 + a * a / (2.0 * delta * delta * d2))
        + 2.0 * (a * r * delta).powi(2) * b.powi(4))
}

/// `(bias bound, mean-squared-error bound)` of an estimator kind. The exact
/// estimator has no error.
pub fn estimator_bounds(c: &ConstantSet, kind: EstimatorKind) -> Result<(f64, f64)> {
    match kind {
        EstimatorKind::Exact => Ok((0.0, 0.0)),
        EstimatorKind::Stochastic => Ok((stochastic_bias_bound(c)?, sigma_f_sq(c)?)),
        EstimatorKind::FirstOrder => Ok((fo_bias_bound(c)?, fo_mse_bound(c)?)),
        EstimatorKind::HessianFree => Ok((hf_bias_bound(c)?, hf_mse_bound(c)?)),
    }
}

/// Symbols an estimator bound depends on.
pub fn estimator_symbols(kind: EstimatorKind) -> Vec<Symbol> {
    use Symbol::*;
    match kind {
        EstimatorKind::Exact => vec![Alpha],
        EstimatorKind::Stochastic => vec![B, L, SigmaG, SigmaH, Alpha, D, DOuter, DHessian],
        EstimatorKind::FirstOrder => vec![B, L, SigmaG, Alpha, D, DOuter],
        EstimatorKind::HessianFree => vec![B, L, Rho, SigmaG, Alpha, D, DOuter, DHessian, Delta],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub l_f: f64,
    pub sigma_f_sq: f64,
    pub gamma_f_sq: f64,
    pub fo_bias: f64,
    pub fo_mse: f64,
    /// Present when `delta` is known.
    pub hf_bias: Option<f64>,
    pub hf_mse: Option<f64>,
}

pub fn derived_constants(c: &ConstantSet) -> Result<DerivedConstants> {
    let hf = match c.get(Symbol::Delta) {
        Ok(_) => Some((hf_bias_bound(c)?, hf_mse_bound(c)?)),
        Err(_) => None,
    };
    Ok(DerivedConstants {
        l_f: meta_smoothness_bound(c)?,
        sigma_f_sq: sigma_f_sq(c)?,
        gamma_f_sq: gamma_f_sq(c)?,
        fo_bias: fo_bias_bound(c)?,
        fo_mse: fo_mse_bound(c)?,
        hf_bias: hf.map(|h| h.0),
        hf_mse: hf.map(|h| h.1),
    })
}

/// Largest admissible constant step, `1 / (10 tau L_F)`.
pub fn max_admissible_beta(c: &ConstantSet) -> Result<f64> {
    Ok(1.0 / (10.0 * c.get(Symbol::Tau)? * meta_smoothness_bound(c)?))
}

fn check_beta(c: &ConstantSet, beta: f64) -> Result<()> {
    let max = max_admissible_beta(c)?;
    if beta > max * (1.0 + 1e-12) {
        return Err(Error::HypothesisViolation(format!(
            "beta = {beta} exceeds 1/(10 tau L_F) = {max}"
        )));
    }
    Ok(())
}

/// First and second drift-moment bounds at local step `t` for step `beta`:
/// `4 beta t (sigma + gamma_F)` and `35 beta^2 t tau (2 sigma^2 + gamma_F^2)`,
/// with `sigma^2` the estimator's mean-squared-error bound.
pub fn drift_bounds(c: &ConstantSet, kind: EstimatorKind, beta: f64, t: usize) -> Result<(f64, f64)> {
    check_beta(c, beta)?;
    let tau = c.get(Symbol::Tau)?;
    let (_, s2) = estimator_bounds(c, kind)?;
    let g2 = gamma_f_sq(c)?;
    let t = t as f64;
    Ok((
        4.0 * beta * t * (s2.sqrt() + g2.sqrt()),
        35.0 * beta * beta * t * tau * (2.0 * s2 + g2),
    ))
}

/// Participation factor `(1 - r) / (r (n - 1))`, zero under full participation.
pub fn participation_factor(n: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("r must lie in (0, 1], got {r}")));
    }
    if r >= 1.0 {
        return Ok(0.0);
    }
    if n < 2.0 {
        return Err(Error::InvalidArgument("partial participation needs n >= 2".into()));
    }
    Ok((1.0 - r) / (r * (n - 1.0)))
}

/// `sigma_T^2` with the estimator's error constants in place of `sigma_F` and
/// the squared bias bound as the last term.
pub fn sigma_t_sq(c: &ConstantSet, kind: EstimatorKind) -> Result<f64> {
    let beta = c.get(Symbol::Beta)?;
    let tau = c.get(Symbol::Tau)?;
    let lf = meta_smoothness_bound(c)?;
    let (m, s2) = estimator_bounds(c, kind)?;
    let g2 = gamma_f_sq(c)?;
    let p = participation_factor(c.get(Symbol::N)?, c.get(Symbol::R)?)?;
    let bl = beta * lf;
    Ok(280.0 * bl * bl * tau * (tau - 1.0) * (2.0 * s2 + g2) + bl * (2.0 * s2 + g2 * p) + m * m)
}

/// `4 (F(w_0) - F*) / (beta tau K) + 4 sigma_T^2`; requires `beta <= 1/(10 tau L_F)`.
pub fn theorem_rhs(c: &ConstantSet, gap: f64, kind: EstimatorKind) -> Result<f64> {
    if !(gap >= 0.0) {
        return Err(Error::InvalidArgument(format!("optimality gap must be nonnegative, got {gap}")));
    }
    c.validate()?;
    let beta = c.get(Symbol::Beta)?;
    check_beta(c, beta)?;
    let tau = c.get(Symbol::Tau)?;
    let k = c.get(Symbol::K)?;
    if beta == 0.0 || tau == 0.0 || k == 0.0 {
        return Err(Error::InvalidArgument("beta, tau and K must be positive".into()));
    }
    Ok(4.0 * gap / (beta * tau * k) + 4.0 * sigma_t_sq(c, kind)?)
}

/// `sigma^2 (1 - r) / (r (n - 1))` with `r = m / n`.
pub fn subset_variance_formula(sigma2: f64, n: usize, m: usize) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("subset size {m} outside 1..={n}")));
    }
    if m == n {
        return Ok(0.0);
    }
    Ok(sigma2 * participation_factor(n as f64, m as f64 / n as f64)?)
}
