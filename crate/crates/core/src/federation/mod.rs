//! The federated round engine: client selection, `tau` local steps per active
//! client, server averaging, step schedules, the FedAvg baseline and
//! test-time personalization.

mod closed_form;
mod io;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{active_count, sample_without_replacement, ParamVector, Purpose, RngStream};
use crate::metagrad::{self, meta_smoothness, MetaEstimator};
use crate::objective::{batch_grad, draw_batch, Batch, LossModel, ModelConstants};

pub use closed_form::minimize_f_closed_form;
pub use io::{read_model_blob, write_model_blob, RoundLog, RoundLogWriter};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { beta: f64 },
    /// `beta_k = c / sqrt(tau (k + 1))`.
    Diminishing { c: f64 },
}

impl StepSchedule {
    /// Diminishing schedule whose first step equals `beta0`.
    pub fn diminishing_from(beta0: f64, tau: usize) -> Self {
        StepSchedule::Diminishing {
            c: beta0 * (tau as f64).sqrt(),
        }
    }

    pub fn beta_at(&self, round: usize, tau: usize) -> f64 {
        match *self {
            StepSchedule::Constant { beta } => beta,
            StepSchedule::Diminishing { c } => c / ((tau * (round + 1)) as f64).sqrt(),
        }
    }

    pub fn initial(&self, tau: usize) -> f64 {
        self.beta_at(0, tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[serde(rename = "perfedavg")]
    PerFedAvg,
    FedAvg,
}

/// Which averaged mid-iterates get an exact `||grad F||^2` evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stationarity {
    Off,
    /// Only `t = t_k`.
    Report,
    /// Every `t` in `0..tau`.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub n: usize,
    pub r: f64,
    pub tau: usize,
    pub rounds: usize,
    pub schedule: StepSchedule,
    pub estimator: MetaEstimator,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Also run the local steps of inactive users, for drift measurement. The
    /// server model is unaffected.
    pub materialize_all_traces: bool,
    /// Keep per-client traces in each [`RoundRecord`].
    pub keep_traces: bool,
    pub stationarity: Stationarity,
    /// Refuse constant steps above `1 / (10 tau L_F)` when `L_F` is known.
    pub enforce_step_bound: bool,
    /// Evaluate clients on the rayon pool.
    pub parallel: bool,
}

impl FederationConfig {
    pub fn new(n: usize, r: f64, tau: usize, rounds: usize, beta: f64, estimator: MetaEstimator) -> Self {
        Self {
            n,
            r,
            tau,
            rounds,
            schedule: StepSchedule::Constant { beta },
            estimator,
            algorithm: Algorithm::PerFedAvg,
            seed: 0,
            materialize_all_traces: false,
            keep_traces: false,
            stationarity: Stationarity::All,
            enforce_step_bound: true,
            parallel: true,
        }
    }

    pub fn active_count(&self) -> usize {
        active_count(self.n, self.r)
    }

    /// Checks the configuration against the users' declared constants.
    pub fn validate(&self, constants: &ModelConstants) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("user count must be positive"));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return Err(invalid(format!("participation fraction r = {} outside (0, 1]", self.r)));
        }
        if self.tau == 0 {
            return Err(invalid("tau must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(invalid("number of rounds must be at least 1"));
        }
        let beta0 = self.schedule.initial(self.tau);
        if !(beta0 >= 0.0 && beta0.is_finite()) {
            return Err(invalid("beta must be finite and nonnegative"));
        }
        self.estimator.validate()?;
        if self.algorithm == Algorithm::PerFedAvg {
            self.estimator.check_smoothness(constants.smoothness)?;
            if self.enforce_step_bound {
                if let StepSchedule::Constant { beta } = self.schedule {
                    if let Some(lf) = federation_meta_smoothness(constants, self.estimator.alpha) {
                        let bound = 1.0 / (10.0 * self.tau as f64 * lf);
                        if beta > bound * (1.0 + 1e-12) {
                            return Err(Error::HypothesisViolation(format!(
                                "beta <= 1/(10 tau L_F) required (beta = {beta}, bound = {bound:.6e})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn client_stream(&self, round: usize, client: usize) -> RngStream {
        RngStream::new(self.seed).round(round as u64).client(client as u64)
    }
}

/// `L_F = 4L + alpha rho B` when all three constants are known.
pub fn federation_meta_smoothness(c: &ModelConstants, alpha: f64) -> Option<f64> {
    Some(meta_smoothness(c.smoothness?, c.hessian_lipschitz?, c.grad_bound?, alpha))
}

/// Largest admissible constant step `1 / (10 tau L_F)`.
pub fn default_beta(c: &ModelConstants, alpha: f64, tau: usize) -> Option<f64> {
    federation_meta_smoothness(c, alpha).map(|lf| 1.0 / (10.0 * tau as f64 * lf))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClientTrace {
    pub client: usize,
    pub active: bool,
    /// `w_{k+1,t}` for `t = 0..=tau`.
    pub iterates: Vec<ParamVector>,
    /// The direction used at each local step.
    pub directions: Vec<ParamVector>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    pub mean_norm: f64,
    pub mean_sq_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub beta: f64,
    pub active: Vec<usize>,
    pub report_index: usize,
    pub server_model: ParamVector,
    /// Averages over the active users for `t = 0..=tau`.
    pub mid_averages: Vec<ParamVector>,
    /// `(t, ||grad F(w_bar_t)||^2)`.
    pub stationarity: Vec<(usize, f64)>,
    /// Spread around the mean for `t = 0..=tau`, over all users when traces
    /// are materialized for everyone and over the active users otherwise.
    pub drift: Vec<DriftStats>,
    /// Number of users the drift statistics range over.
    pub drift_users: usize,
    pub traces: Option<Vec<ClientTrace>>,
}

/// Uniform draw from `0..tau`.
pub fn pick_report_index(tau: usize, rng: &RngStream) -> Result<usize> {
    if tau == 0 {
        return Err(invalid("tau must be at least 1"));
    }
    Ok(rng.rng().random_range(0..tau))
}

/// `w - beta grad~ f_i(w, D)` with `D` drawn from the outer-gradient stream.
pub fn fedavg_local_step<M: LossModel>(
    model: &M,
    w: &ParamVector,
    beta: f64,
    batch_size: usize,
    rng: &RngStream,
) -> Result<ParamVector> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid("beta must be finite and nonnegative"));
    }
    let batch = draw_batch(model, batch_size, &rng.child(Purpose::OuterGrad))?;
    let g = batch_grad(model, w, &batch)?;
    g.ensure_finite("local gradient")?;
    let mut next = w.clone();
    next.axpy(-beta, &g);
    Ok(next)
}

/// One-step adaptation on the user's test batch: `w - alpha grad~ f_i(w, test)`.
pub fn personalize<M: LossModel>(
    model: &M,
    w: &ParamVector,
    alpha: f64,
    test_batch: &Batch<M::Sample>,
) -> Result<ParamVector> {
    let g = batch_grad(model, w, test_batch)?;
    let mut out = w.clone();
    out.axpy(-alpha, &g);
    Ok(out)
}

/// `grad F(w) = (1/n) sum_i grad F_i(w)` from exact oracles.
pub fn meta_grad_federation<M: LossModel>(models: &[M], w: &ParamVector, alpha: f64) -> Result<ParamVector> {
    let parts = models
        .par_iter()
        .map(|m| metagrad::meta_grad_exact(m, w, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParamVector::mean(&parts).ok_or_else(|| invalid("no users"))?)
}

/// `F(w) = (1/n) sum_i F_i(w)` from exact oracles.
pub fn meta_loss_federation<M: LossModel>(models: &[M], w: &ParamVector, alpha: f64) -> Result<f64> {
    let parts = models
        .par_iter()
        .map(|m| metagrad::meta_loss(m, w, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().sum::<f64>() / models.len() as f64)
}

fn local_trajectory<M: LossModel>(
    model: &M,
    w: &ParamVector,
    cfg: &FederationConfig,
    beta: f64,
    round: usize,
    client: usize,
    active: bool,
) -> Result<ClientTrace> {
    let base = cfg.client_stream(round, client);
    let mut iterates = Vec::with_capacity(cfg.tau + 1);
    let mut directions = Vec::with_capacity(cfg.tau);
    iterates.push(w.clone());
    let mut cur = w.clone();
    for t in 0..cfg.tau {
        let rng = base.purpose(Purpose::LocalStep(t as u32));
        let dir = match cfg.algorithm {
            Algorithm::PerFedAvg => metagrad::estimate(model, &cur, &cfg.estimator, &rng)?.value,
            Algorithm::FedAvg => {
                let batch = draw_batch(model, cfg.estimator.batches.outer.max(1), &rng.child(Purpose::OuterGrad))?;
                let g = batch_grad(model, &cur, &batch)?;
                g.ensure_finite("local gradient")?;
                g
            }
        };
        cur.axpy(-beta, &dir);
        iterates.push(cur.clone());
        directions.push(dir);
    }
    Ok(ClientTrace {
        client,
        active,
        iterates,
        directions,
    })
}

/// Mean of the `t`-th iterates, accumulated as offsets from the shared start.
fn average_at(traces: &[&ClientTrace], t: usize, start: &ParamVector) -> ParamVector {
    let mut acc = ParamVector::zeros(start.dim());
    for tr in traces {
        acc += &tr.iterates[t];
        acc -= start;
    }
    let mut out = start.clone();
    out.axpy(1.0 / traces.len() as f64, &acc);
    out
}

/// Runs round `round` of the configured algorithm from server model `w`.
pub fn run_round<M: LossModel>(
    w: &ParamVector,
    models: &[M],
    cfg: &FederationConfig,
    round: usize,
) -> Result<RoundRecord> {
    if models.len() != cfg.n {
        return Err(invalid(format!("config says n = {} but {} models given", cfg.n, models.len())));
    }
    let dim = w.dim();
    for (i, m) in models.iter().enumerate() {
        if m.dim() != dim {
            return Err(invalid(format!("user {i} has dimension {}, server model {dim}", m.dim())));
        }
    }
    let m = cfg.active_count();
    if m == 0 {
        return Err(invalid("empty active set"));
    }
    let round_rng = RngStream::new(cfg.seed).round(round as u64);
    let active = sample_without_replacement(cfg.n, m, &round_rng.purpose(Purpose::Selection))?;
    let report_index = pick_report_index(cfg.tau, &round_rng.purpose(Purpose::ReportIndex))?;
    let beta = cfg.schedule.beta_at(round, cfg.tau);

    let clients: Vec<(usize, bool)> = if cfg.materialize_all_traces {
        (0..cfg.n).map(|i| (i, active.contains(i))).collect()
    } else {
        active.indices().iter().map(|&i| (i, true)).collect()
    };
    let run = |&(i, is_active): &(usize, bool)| local_trajectory(&models[i], w, cfg, beta, round, i, is_active);
    let traces: Vec<ClientTrace> = if cfg.parallel {
        clients.par_iter().map(run).collect::<Result<_>>()?
    } else {
        clients.iter().map(run).collect::<Result<_>>()?
    };

    let active_traces: Vec<&ClientTrace> = traces.iter().filter(|t| t.active).collect();
    let mid_averages: Vec<ParamVector> = (0..=cfg.tau).map(|t| average_at(&active_traces, t, w)).collect();
    let server_model = mid_averages[cfg.tau].clone();
    server_model.ensure_finite("server model")?;

    let all_traces: Vec<&ClientTrace> = traces.iter().collect();
    let drift = (0..=cfg.tau)
        .map(|t| {
            let mean = average_at(&all_traces, t, w);
            let (mut s1, mut s2) = (0.0, 0.0);
            for tr in &all_traces {
                let dist = tr.iterates[t].dist(&mean);
                s1 += dist;
                s2 += dist * dist;
            }
            let k = all_traces.len() as f64;
            DriftStats {
                mean_norm: s1 / k,
                mean_sq_norm: s2 / k,
            }
        })
        .collect();

    let alpha = cfg.estimator.alpha;
    let ts: Vec<usize> = match cfg.stationarity {
        Stationarity::Off => Vec::new(),
        Stationarity::Report => vec![report_index],
        Stationarity::All => (0..cfg.tau).collect(),
    };
    let stationarity = ts
        .into_iter()
        .map(|t| Ok((t, meta_grad_federation(models, &mid_averages[t], alpha)?.norm_sq())))
        .collect::<Result<Vec<_>>>()?;

    Ok(RoundRecord {
        round,
        beta,
        active: active.indices().to_vec(),
        report_index,
        server_model,
        mid_averages,
        stationarity,
        drift,
        drift_users: traces.len(),
        traces: cfg.keep_traces.then_some(traces),
    })
}

/// Runs all rounds from `w0`, handing each record to `sink` as it completes.
/// Returns the final server model.
pub fn run_training_with<M, F>(models: &[M], cfg: &FederationConfig, w0: &ParamVector, mut sink: F) -> Result<ParamVector>
where
    M: LossModel,
    F: FnMut(RoundRecord) -> Result<()>,
{
    let constants = ModelConstants::merge_max(models.iter().map(|m| m.constants()).collect::<Vec<_>>().iter());
    cfg.validate(&constants)?;
    let mut w = w0.clone();
    for k in 0..cfg.rounds {
        let rec = run_round(&w, models, cfg, k)?;
        w = rec.server_model.clone();
        sink(rec)?;
    }
    Ok(w)
}

/// Runs all rounds from `w0` and returns every record.
pub fn run_training<M: LossModel>(models: &[M], cfg: &FederationConfig, w0: &ParamVector) -> Result<Vec<RoundRecord>> {
    let mut out = Vec::with_capacity(cfg.rounds);
    run_training_with(models, cfg, w0, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metagrad::{meta_grad_exact, BatchSizes, EstimatorKind};
    use crate::objective::{make_synthetic_federation, HeteroSpread, QuadraticTask, SyntheticOptions};

    fn scalar_pair() -> Vec<QuadraticTask> {
        vec![
            QuadraticTask::diagonal(&[1.0], &[0.5]).unwrap(),
            QuadraticTask::diagonal(&[2.0], &[-1.0]).unwrap(),
        ]
    }

    fn fed(n: usize, noise: (f64, f64), seed: u64) -> Vec<QuadraticTask> {
        make_synthetic_federation(
            n,
            3,
            HeteroSpread { grad: 0.3, hess: 0.2 },
            noise,
            SyntheticOptions::default(),
            &RngStream::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn single_exact_step_is_meta_gradient_descent() {
        let tasks = fed(4, (0.0, 0.0), 1);
        let est = MetaEstimator::exact(0.2).unwrap();
        let cfg = FederationConfig::new(4, 1.0, 1, 1, 0.01, est);
        let w = ParamVector::new(vec![0.3, -0.2, 0.1]).unwrap();
        let rec = run_round(&w, &tasks, &cfg, 0).unwrap();
        let mut expected = w.clone();
        expected.axpy(-0.01, &meta_grad_federation(&tasks, &w, 0.2).unwrap());
        assert!(rec.server_model.dist(&expected) < 1e-15);
        assert_eq!(rec.mid_averages[0], w);
    }

    #[test]
    fn hand_unrolled_two_clients_two_steps() {
        let tasks = scalar_pair();
        let (alpha, beta) = (0.1, 0.01);
        let est = MetaEstimator::exact(alpha).unwrap();
        let mut cfg = FederationConfig::new(2, 1.0, 2, 1, beta, est);
        cfg.enforce_step_bound = false;
        let w0 = 1.0;
        let step = |a: f64, b: f64, w: f64| {
            let inner = w - alpha * (a * w + b);
            w - beta * (1.0 - alpha * a) * (a * inner + b)
        };
        let c0 = step(1.0, 0.5, step(1.0, 0.5, w0));
        let c1 = step(2.0, -1.0, step(2.0, -1.0, w0));
        let rec = run_round(&ParamVector::new(vec![w0]).unwrap(), &tasks, &cfg, 0).unwrap();
        assert!((rec.server_model[0] - 0.5 * (c0 + c1)).abs() < 1e-15);
    }

    #[test]
    fn identical_clients_match_full_participation() {
        let t = QuadraticTask::diagonal(&[1.0, 0.5], &[0.2, 0.1]).unwrap();
        let tasks = vec![t.clone(), t.clone(), t.clone(), t];
        let est = MetaEstimator::exact(0.1).unwrap();
        let w = ParamVector::new(vec![1.0, 1.0]).unwrap();
        let full = run_round(&w, &tasks, &FederationConfig::new(4, 1.0, 3, 1, 0.01, est), 0).unwrap();
        let half = run_round(&w, &tasks, &FederationConfig::new(4, 0.5, 3, 1, 0.01, est), 0).unwrap();
        assert_eq!(half.active.len(), 2);
        assert_eq!(full.server_model, half.server_model);
    }

    #[test]
    fn averaging_is_conserved_and_deterministic() {
        let tasks = fed(6, (0.2, 0.1), 2);
        let est = MetaEstimator::new(0.2, EstimatorKind::Stochastic, BatchSizes::uniform(4)).unwrap();
        let mut cfg = FederationConfig::new(6, 0.5, 3, 5, 0.005, est);
        cfg.keep_traces = true;
        cfg.seed = 9;
        let w0 = ParamVector::zeros(3);
        let a = run_training(&tasks, &cfg, &w0).unwrap();
        let b = run_training(&tasks, &cfg, &w0).unwrap();
        assert_eq!(a, b);
        cfg.parallel = false;
        assert_eq!(a, run_training(&tasks, &cfg, &w0).unwrap());
        for rec in &a {
            let traces = rec.traces.as_ref().unwrap();
            let finals: Vec<ParamVector> = traces.iter().map(|t| t.iterates[3].clone()).collect();
            let mean = ParamVector::mean(&finals).unwrap();
            assert!(rec.server_model.dist(&mean) <= 1e-12 * (1.0 + rec.server_model.norm()));
            for t in traces {
                assert_eq!(t.iterates[0], rec.mid_averages[0]);
            }
        }
    }

    #[test]
    fn all_traces_do_not_change_server_model() {
        let tasks = fed(6, (0.2, 0.1), 2);
        let est = MetaEstimator::new(0.2, EstimatorKind::Stochastic, BatchSizes::uniform(4)).unwrap();
        let mut cfg = FederationConfig::new(6, 0.5, 3, 3, 0.005, est);
        let w0 = ParamVector::zeros(3);
        let a = run_training(&tasks, &cfg, &w0).unwrap();
        cfg.materialize_all_traces = true;
        let b = run_training(&tasks, &cfg, &w0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.server_model, y.server_model);
        }
    }

    #[test]
    fn zero_beta_keeps_model() {
        let tasks = fed(3, (0.2, 0.1), 3);
        let est = MetaEstimator::new(0.2, EstimatorKind::HessianFree, BatchSizes::uniform(2)).unwrap();
        let cfg = FederationConfig::new(3, 1.0, 2, 4, 0.0, est);
        let w0 = ParamVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        for rec in run_training(&tasks, &cfg, &w0).unwrap() {
            assert_eq!(rec.server_model, w0);
        }
    }

    #[test]
    fn converges_to_closed_form_minimizer() {
        let tasks = fed(5, (0.0, 0.0), 4);
        let alpha = 0.2;
        let est = MetaEstimator::exact(alpha).unwrap();
        let mut cfg = FederationConfig::new(5, 1.0, 1, 500, 0.0, est);
        let c = ModelConstants::merge_max(tasks.iter().map(|t| t.constants()).collect::<Vec<_>>().iter());
        cfg.schedule = StepSchedule::Constant { beta: 1.0 / meta_smoothness(c.smoothness.unwrap(), 0.0, 0.0, alpha) };
        cfg.enforce_step_bound = false;
        cfg.stationarity = Stationarity::Off;
        let w_final = run_training(&tasks, &cfg, &ParamVector::zeros(3)).unwrap().pop().unwrap().server_model;
        let g = meta_grad_federation(&tasks, &w_final, alpha).unwrap();
        assert!(g.norm_sq() <= 1e-8, "{}", g.norm_sq());
        let star = minimize_f_closed_form(&tasks, alpha).unwrap();
        assert!(star.dist(&w_final) < 1e-3);
    }

    #[test]
    fn step_bound_is_enforced() {
        let tasks = fed(3, (0.0, 0.0), 5);
        let est = MetaEstimator::exact(0.2).unwrap();
        let cfg = FederationConfig::new(3, 1.0, 5, 1, 1.0, est);
        let r = run_training(&tasks, &cfg, &ParamVector::zeros(3));
        assert!(matches!(r, Err(Error::HypothesisViolation(_))));
        let c = tasks[0].constants();
        let ok = default_beta(&c, 0.2, 5).unwrap();
        let cfg = FederationConfig::new(3, 1.0, 5, 1, ok * 0.999, est);
        assert!(run_training(&tasks, &cfg, &ParamVector::zeros(3)).is_ok());
    }

    #[test]
    fn fedavg_matches_first_order_at_zero_alpha() {
        let t = fed(2, (0.3, 0.1), 6).remove(0);
        let w = ParamVector::new(vec![0.2, 0.0, -0.1]).unwrap();
        let rng = RngStream::new(4).round(1).client(0);
        let fo = MetaEstimator::new(0.0, EstimatorKind::FirstOrder, BatchSizes::new(5, 5, 0)).unwrap();
        let a = metagrad::local_update_step(&t, &w, &fo, 0.1, &rng).unwrap();
        let b = fedavg_local_step(&t, &w, 0.1, 5, &rng).unwrap();
        assert_eq!(a, b);
        let clean = QuadraticTask::diagonal(&[1.0, 2.0], &[0.5, 0.5]).unwrap();
        let w2 = ParamVector::new(vec![1.0, 1.0]).unwrap();
        let s = fedavg_local_step(&clean, &w2, 0.1, 3, &rng).unwrap();
        assert!(s.dist(&ParamVector::new(vec![0.85, 0.75]).unwrap()) < 1e-15);
    }

    #[test]
    fn report_index_properties() {
        assert_eq!(pick_report_index(1, &RngStream::new(3)).unwrap(), 0);
        let r = RngStream::new(8);
        assert_eq!(pick_report_index(4, &r).unwrap(), pick_report_index(4, &r).unwrap());
        let mut counts = [0usize; 4];
        for k in 0..100_000u64 {
            counts[pick_report_index(4, &RngStream::new(1).round(k)).unwrap()] += 1;
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 25_000.0).powi(2) / 25_000.0).sum();
        assert!(chi2 < 16.27, "chi2 {chi2}");
    }

    #[test]
    fn personalization_identities() {
        let t = QuadraticTask::diagonal(&[1.0, 3.0], &[0.2, -0.4]).unwrap();
        let w = ParamVector::new(vec![0.5, 0.5]).unwrap();
        let batch = draw_batch(&t, 3, &RngStream::new(1)).unwrap();
        assert_eq!(personalize(&t, &w, 0.0, &batch).unwrap(), w);
        let p = personalize(&t, &w, 0.2, &batch).unwrap();
        let lhs = t.exact_loss(&p).unwrap();
        assert!((lhs - metagrad::meta_loss(&t, &w, 0.2).unwrap()).abs() < 1e-15);
        let _ = meta_grad_exact(&t, &w, 0.2).unwrap();
    }

    #[test]
    fn diminishing_schedule() {
        let s = StepSchedule::diminishing_from(0.1, 4);
        assert!((s.beta_at(0, 4) - 0.1).abs() < 1e-15);
        assert!((s.beta_at(3, 4) - 0.05).abs() < 1e-15);
    }
}
