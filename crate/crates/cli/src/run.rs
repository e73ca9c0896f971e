//! Builds users from a [`RunSpec`] and executes the subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use perfed_core::diagnostics::{
    self, average_stationarity, ball_probes, check_drift, check_estimator_moments, check_gamma_f,
    check_smoothness, max_meta_lipschitz_ratio, quadratic_meta_hessian_norm, theorem_rhs, BoundReport, ConstantSet,
    Provenance,
};
use perfed_core::federation::{
    self, default_beta, minimize_f_closed_form, write_model_blob, FederationConfig, RoundLogWriter, RoundRecord,
    Stationarity, StepSchedule,
};
use perfed_core::heterogeneity::{
    estimate_gamma, label_distribution, partition_csv, partition_dataset, tv_gamma_bound, tv_to_mixture, w1_to_mixture, Partition,
    PartitionSpec, SimilarityReport, DEFAULT_HVP_PROBES, PARTITION_CLASSES,
};
use perfed_core::objective::{
    estimate_sigma, linalg, load_idx_dataset, make_synthetic_federation, quadratic_gamma_bounds, Dataset,
    HeteroSpread, LossModel, MlpEluModel, MlpTask, ModelConstants, QuadraticTask, SyntheticOptions,
};
use perfed_core::{BatchSizes, EstimatorKind, MetaEstimator, ParamVector, Purpose, RngStream};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{atomic_write, mean_ci95, render_summary, ArmSummary, AtomicFile};
use crate::spec::{Arm, RunSpec, ScheduleKind, TaskFamily};

/// The users of a run.
pub enum Users {
    Quadratic(Vec<QuadraticTask>),
    Network {
        tasks: Vec<MlpTask>,
        data: Dataset,
        partition: Partition,
    },
}

pub struct Workspace {
    pub users: Users,
    pub w0: ParamVector,
    /// Declared federation-wide constants; empty for network tasks.
    pub constants: ModelConstants,
}

impl Users {
    pub fn len(&self) -> usize {
        match self {
            Users::Quadratic(t) => t.len(),
            Users::Network { tasks, .. } => tasks.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loads the dataset and splits it across users.
pub fn load_partition(spec: &RunSpec) -> Result<(Dataset, Partition), CliError> {
    let t = &spec.task;
    for p in [&t.images, &t.labels] {
        if !p.exists() {
            return Err(CliError::Data(format!("dataset file {} not found", p.display())));
        }
    }
    let data = load_idx_dataset(&t.images, &t.labels, PARTITION_CLASSES)?;
    let pspec = PartitionSpec {
        n: spec.federation.n,
        a: spec.partition.a,
        diff_hetero: spec.partition.diff_hetero,
    };
    let part = partition_dataset(&data, &pspec, &RngStream::new(t.seed))?;
    Ok((data, part))
}

pub fn build(spec: &RunSpec) -> Result<Workspace, CliError> {
    let t = &spec.task;
    let task_rng = RngStream::new(t.seed);
    match t.family {
        TaskFamily::Quadratic => {
            let tasks = make_synthetic_federation(
                spec.federation.n,
                t.dim,
                HeteroSpread {
                    grad: t.grad_spread,
                    hess: t.hess_spread,
                },
                (t.grad_noise, t.hess_noise),
                SyntheticOptions {
                    curvature: (t.curvature_min, t.curvature_max),
                    base_offset: t.base_offset,
                    domain_radius: t.domain_radius,
                    convex: true,
                },
                &task_rng,
            )?;
            let mut constants = ModelConstants::merge_max(tasks.iter().map(|m| m.constants()).collect::<Vec<_>>().iter());
            if let Some(l) = t.smoothness {
                constants.smoothness = Some(l);
            }
            Ok(Workspace {
                w0: ParamVector::zeros(t.dim),
                users: Users::Quadratic(tasks),
                constants,
            })
        }
        TaskFamily::Logistic | TaskFamily::MlpMnistSubset => {
            let (data, partition) = load_partition(spec)?;
            let mut widths = vec![data.feature_dim()];
            widths.extend(&t.hidden);
            widths.push(PARTITION_CLASSES);
            let net = MlpEluModel::new(widths)?;
            let w0 = net.init(&task_rng);
            let tasks = partition
                .users
                .iter()
                .map(|u| MlpTask::new(net.clone(), u.clone()))
                .collect::<perfed_core::Result<Vec<_>>>()?;
            let constants = ModelConstants {
                smoothness: t.smoothness,
                ..ModelConstants::default()
            };
            Ok(Workspace {
                users: Users::Network { tasks, data, partition },
                w0,
                constants,
            })
        }
    }
}

fn estimator(spec: &RunSpec, kind: EstimatorKind) -> Result<MetaEstimator, CliError> {
    let e = &spec.estimator;
    let est = MetaEstimator::new(e.alpha, kind, BatchSizes::new(e.d_inner, e.d_outer, e.d_hessian))?;
    Ok(match e.delta {
        Some(d) => est.with_delta(d)?,
        None => est,
    })
}

/// The federation config for `spec`, optionally overridden by a comparison arm.
pub fn federation_config(spec: &RunSpec, constants: &ModelConstants, arm: Option<Arm>) -> Result<FederationConfig, CliError> {
    let f = &spec.federation;
    let (algorithm, kind) = match arm {
        Some(a) => a.setup(spec.estimator.kind),
        None => (f.algorithm, spec.estimator.kind),
    };
    let est = estimator(spec, kind)?;
    let beta = match f.beta {
        Some(b) => b,
        None => default_beta(constants, est.alpha, f.tau).ok_or_else(|| {
            CliError::Config("federation.beta: required when the smoothness constants are unknown".into())
        })?,
    };
    let mut cfg = FederationConfig::new(f.n, f.r, f.tau, f.rounds, beta, est);
    if f.schedule == ScheduleKind::Diminishing {
        cfg.schedule = StepSchedule::diminishing_from(beta, f.tau);
    }
    cfg.algorithm = algorithm;
    cfg.seed = spec.seed;
    cfg.materialize_all_traces = f.materialize_all_traces;
    cfg.stationarity = f.stationarity;
    cfg.enforce_step_bound = f.enforce_step_bound;
    cfg.validate(constants)?;
    Ok(cfg)
}

/// Quality of a server model after one exact personalization step per user.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `(1/n) sum_i f_i(w - alpha grad f_i(w))`.
    pub personalized_loss: f64,
    /// Mean accuracy of the personalized models on their users' data.
    pub personalized_accuracy: Option<f64>,
    /// `||grad F(w)||^2`.
    pub grad_norm_sq: f64,
}

fn personalized<M: LossModel>(m: &M, w: &ParamVector, alpha: f64) -> Result<ParamVector, CliError> {
    let g = m
        .exact_grad(w)
        .ok_or_else(|| CliError::Config("personalization needs exact gradients".into()))?;
    let mut out = w.clone();
    out.axpy(-alpha, &g);
    out.ensure_finite("personalized model")?;
    Ok(out)
}

pub fn evaluate(users: &Users, w: &ParamVector, alpha: f64) -> Result<Evaluation, CliError> {
    match users {
        Users::Quadratic(tasks) => Ok(Evaluation {
            personalized_loss: federation::meta_loss_federation(tasks, w, alpha)?,
            personalized_accuracy: None,
            grad_norm_sq: federation::meta_grad_federation(tasks, w, alpha)?.norm_sq(),
        }),
        Users::Network { tasks, .. } => {
            let mut loss = 0.0;
            let mut acc = 0.0;
            for t in tasks {
                let wi = personalized(t, w, alpha)?;
                loss += t.exact_loss(&wi).expect("full-data oracle");
                acc += t.accuracy(&wi, t.data());
            }
            let n = tasks.len() as f64;
            if !loss.is_finite() {
                return Err(CliError::Numeric("personalized loss is not finite".into()));
            }
            Ok(Evaluation {
                personalized_loss: loss / n,
                personalized_accuracy: Some(acc / n),
                grad_norm_sq: federation::meta_grad_federation(tasks, w, alpha)?.norm_sq(),
            })
        }
    }
}

fn run_with_sink<F>(ws: &Workspace, cfg: &FederationConfig, sink: F) -> Result<ParamVector, CliError>
where
    F: FnMut(RoundRecord) -> perfed_core::Result<()>,
{
    Ok(match &ws.users {
        Users::Quadratic(t) => federation::run_training_with(t, cfg, &ws.w0, sink)?,
        Users::Network { tasks, .. } => federation::run_training_with(tasks, cfg, &ws.w0, sink)?,
    })
}

/// Runs training and returns the final server model and every round record.
pub fn run_history(ws: &Workspace, cfg: &FederationConfig) -> Result<(ParamVector, Vec<RoundRecord>), CliError> {
    let mut hist = Vec::with_capacity(cfg.rounds);
    let w = run_with_sink(ws, cfg, |r| {
        hist.push(r);
        Ok(())
    })?;
    Ok((w, hist))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub family: TaskFamily,
    pub algorithm: federation::Algorithm,
    pub estimator: EstimatorKind,
    pub rounds: usize,
    pub beta: f64,
    pub evaluation: Evaluation,
    /// `||w_K - w*||` for quadratic users.
    pub distance_to_optimum: Option<f64>,
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    started_unix: f64,
    wall_seconds: f64,
}

fn write_timing(dir: &Path, command: &str, started: SystemTime, clock: Instant) -> Result<(), CliError> {
    let t = Timing {
        command,
        started_unix: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    atomic_write(&dir.join("timing.json"), serde_json::to_string_pretty(&t).expect("serializable").as_bytes())?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

/// `train`: round log, final model, summary and (when enabled) diagnostics.
pub fn train(spec: &RunSpec, out_dir: &Path) -> Result<TrainSummary, CliError> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let dir = prepare_dir(out_dir)?;
    let ws = build(spec)?;
    let cfg = federation_config(spec, &ws.constants, None)?;

    let mut log = RoundLogWriter::new(AtomicFile::create(&dir.join("rounds.jsonl"))?);
    let w = run_with_sink(&ws, &cfg, |r| log.write(&r))?;
    log.finish()?.commit()?;

    let model_path = dir.join("model.bin");
    let tmp = dir.join("model.bin.tmp");
    write_model_blob(&tmp, &w)?;
    fs::rename(&tmp, &model_path)?;

    let alpha = cfg.estimator.alpha;
    let distance_to_optimum = match &ws.users {
        Users::Quadratic(tasks) => Some(w.dist(&minimize_f_closed_form(tasks, alpha)?)),
        Users::Network { .. } => None,
    };
    let summary = TrainSummary {
        family: spec.task.family,
        algorithm: cfg.algorithm,
        estimator: cfg.estimator.kind,
        rounds: cfg.rounds,
        beta: cfg.schedule.initial(cfg.tau),
        evaluation: evaluate(&ws.users, &w, alpha)?,
        distance_to_optimum,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    atomic_write(&dir.join("summary.txt"), render_train_summary(&summary).as_bytes())?;
    if spec.diagnostics.enabled {
        let reports = diagnostic_reports(spec, &ws)?;
        write_json(&dir.join("diagnostics.json"), &reports)?;
    }
    write_timing(&dir, "train", started, clock)?;
    Ok(summary)
}

pub fn render_train_summary(s: &TrainSummary) -> String {
    let mut out = format!(
        "family {:?}, algorithm {:?}, estimator {}, rounds {}, beta {:.6e}\n",
        s.family,
        s.algorithm,
        s.estimator.name(),
        s.rounds,
        s.beta
    );
    out += &format!("personalized loss   {:.8}\n", s.evaluation.personalized_loss);
    if let Some(a) = s.evaluation.personalized_accuracy {
        out += &format!("personalized acc    {:.2}%\n", 100.0 * a);
    }
    out += &format!("||grad F||^2        {:.6e}\n", s.evaluation.grad_norm_sq);
    if let Some(d) = s.distance_to_optimum {
        out += &format!("||w - w*||          {d:.6e}\n");
    }
    out
}

fn diagnostic_estimator(spec: &RunSpec) -> Result<MetaEstimator, CliError> {
    let est = estimator(spec, spec.estimator.kind)?;
    if est.kind == EstimatorKind::HessianFree && est.delta.is_none() {
        return Ok(est.with_delta(1e-3)?);
    }
    Ok(est)
}

/// Bound reports for the configured run. Quadratic users use their declared
/// constants; network users use sampled estimates and are flagged as such.
pub fn diagnostic_reports(spec: &RunSpec, ws: &Workspace) -> Result<Vec<BoundReport>, CliError> {
    let rng = RngStream::new(spec.seed).child(Purpose::Custom(0xd1a6));
    let d = &spec.diagnostics;
    let est = diagnostic_estimator(spec)?;
    match &ws.users {
        Users::Quadratic(tasks) => {
            let cfg = federation_config(spec, &ws.constants, None)?;
            let (gg, gh) = quadratic_gamma_bounds(tasks)?;
            let c = ConstantSet::new()
                .with_model(&ws.constants, Provenance::Declared)?
                .with_federation(&cfg)?
                .with_estimator(&est)?
                .with_gamma(gg, gh, Provenance::Declared)?;
            let radius = spec.task.domain_radius;
            let mut reports = vec![check_smoothness(tasks, &c, d.pairs, &rng.child(Purpose::Custom(1)))?];
            let exact = tasks
                .iter()
                .map(|t| quadratic_meta_hessian_norm(t, est.alpha))
                .fold(0.0, f64::max);
            let ratio = max_meta_lipschitz_ratio(tasks, est.alpha, radius, d.pairs, &rng.child(Purpose::Custom(1)))?;
            reports.push(BoundReport::new("meta_smoothness_exact", exact, ratio, None));
            let probes = ball_probes(spec.task.dim, radius, d.probes, &rng);
            reports.push(check_gamma_f(tasks, &c, &probes)?);
            let (bias, mse) = check_estimator_moments(&tasks[0], &est, &probes[0], d.mc_trials, &rng, &c)?;
            reports.extend([bias, mse]);

            if let StepSchedule::Constant { beta } = cfg.schedule {
                if beta <= diagnostics::max_admissible_beta(&c)? {
                    let mut run = cfg;
                    run.estimator = est;
                    run.materialize_all_traces = true;
                    run.stationarity = Stationarity::All;
                    let (_, hist) = run_history(ws, &run)?;
                    reports.extend(check_drift(std::slice::from_ref(&hist), &c, est.kind)?);
                    let w_star = minimize_f_closed_form(tasks, est.alpha)?;
                    let gap = federation::meta_loss_federation(tasks, &ws.w0, est.alpha)?
                        - federation::meta_loss_federation(tasks, &w_star, est.alpha)?;
                    let rhs = theorem_rhs(&c, gap.max(0.0), est.kind)?;
                    reports.push(BoundReport::new("theorem_rhs", rhs, average_stationarity(&hist, run.tau)?, None));
                }
            }
            Ok(reports)
        }
        Users::Network { tasks, .. } => {
            let dim = ws.w0.dim();
            let probes: Vec<ParamVector> = ball_probes(dim, 1.0, d.probes.min(3), &rng)
                .into_iter()
                .map(|p| &p + &ws.w0)
                .collect();
            let mut sg = 0.0f64;
            let mut sh = 0.0f64;
            for (i, t) in tasks.iter().enumerate() {
                let (g, h) = estimate_sigma(t, &probes[..1], 10, &rng.child(Purpose::Custom(i as u64)))?;
                sg = sg.max(g);
                sh = sh.max(h);
            }
            let (gg2, gh2) = estimate_gamma(tasks, &probes, DEFAULT_HVP_PROBES, &rng)?;
            let (l, b, rho) = estimate_smoothness(tasks, &probes, d.pairs.min(50), &rng)?;
            let radius = probes.iter().map(|p| p.norm()).fold(0.0, f64::max);
            let c = ConstantSet::new()
                .with(diagnostics::Symbol::B, b, Provenance::Estimated)?
                .with(diagnostics::Symbol::L, l, Provenance::Estimated)?
                .with(diagnostics::Symbol::Rho, rho, Provenance::Estimated)?
                .with(diagnostics::Symbol::SigmaG, sg, Provenance::Estimated)?
                .with(diagnostics::Symbol::SigmaH, sh, Provenance::Estimated)?
                .with(diagnostics::Symbol::Radius, radius, Provenance::Estimated)?
                .with_gamma(gg2.sqrt(), gh2.sqrt(), Provenance::Estimated)?
                .with_estimator(&est)?;
            let mut reports = Vec::new();
            if c.validate().is_ok() {
                reports.push(check_gamma_f(tasks, &c, &probes)?);
                let (bias, mse) =
                    check_estimator_moments(&tasks[0], &est, &probes[0], d.mc_trials.min(1000), &rng, &c)?;
                reports.extend([bias, mse]);
            }
            Ok(reports)
        }
    }
}

/// Sampled `(L, B, rho)` around the probe points: the largest gradient
/// difference ratio, gradient norm and Hessian-vector difference ratio over
/// nearby pairs. These are lower estimates of the true constants.
pub fn estimate_smoothness<M: LossModel>(
    models: &[M],
    probes: &[ParamVector],
    pairs: usize,
    rng: &RngStream,
) -> Result<(f64, f64, f64), CliError> {
    let dim = probes[0].dim();
    let (mut l, mut b, mut rho) = (0.0f64, 0.0f64, 0.0f64);
    let oracle = || CliError::Config("constant estimation needs exact oracles".into());
    for (j, m) in (0..pairs).map(|j| (j, &models[j % models.len()])) {
        let s = rng.child(Purpose::Trial(j as u64));
        let w1 = &probes[j % probes.len()];
        let mut r = s.rng();
        let step = linalg::unit_vector(dim, &mut r).scaled(0.1);
        let w2 = w1 + &step;
        let v = linalg::unit_vector(dim, &mut r);
        let g1 = m.exact_grad(w1).ok_or_else(oracle)?;
        let g2 = m.exact_grad(&w2).ok_or_else(oracle)?;
        l = l.max(g1.dist(&g2) / 0.1);
        b = b.max(g1.norm()).max(g2.norm());
        let h1 = m.exact_hvp(w1, &v).ok_or_else(oracle)?;
        let h2 = m.exact_hvp(&w2, &v).ok_or_else(oracle)?;
        rho = rho.max(h1.dist(&h2) / 0.1);
    }
    Ok((l, b, rho))
}

/// `diagnose`: bound reports as JSON plus a table on standard output.
pub fn diagnose(spec: &RunSpec, out_dir: &Path) -> Result<Vec<BoundReport>, CliError> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let dir = prepare_dir(out_dir)?;
    let ws = build(spec)?;
    let reports = diagnostic_reports(spec, &ws)?;
    write_json(&dir.join("diagnostics.json"), &reports)?;
    write_timing(&dir, "diagnose", started, clock)?;
    Ok(reports)
}

/// Reports shown on the terminal: everything except per-step drift rows, of
/// which only the tightest first- and second-moment rows are kept.
pub fn condensed(reports: &[BoundReport]) -> Vec<BoundReport> {
    let tightest = |prefix: &str| {
        reports
            .iter()
            .filter(|r| r.name.starts_with(prefix) && r.analytic > 0.0)
            .max_by(|a, b| (a.measured / a.analytic).total_cmp(&(b.measured / b.analytic)))
            .cloned()
    };
    let mut out: Vec<BoundReport> = reports.iter().filter(|r| !r.name.starts_with("drift_")).cloned().collect();
    out.extend(tightest("drift_first"));
    out.extend(tightest("drift_second"));
    if let Some(bad) = reports.iter().find(|r| r.name.starts_with("drift_") && !r.pass) {
        out.push(bad.clone());
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub users: usize,
    pub counts: Vec<Vec<usize>>,
    pub similarity: SimilarityReport,
}

/// `partition`: the assignment CSV and label-distribution similarity measures.
pub fn partition(spec: &RunSpec, out_dir: &Path) -> Result<PartitionSummary, CliError> {
    if !spec.task.family.uses_dataset() {
        return Err(CliError::Config("task.family: partition needs a dataset family".into()));
    }
    let (started, clock) = (SystemTime::now(), Instant::now());
    let dir = prepare_dir(out_dir)?;
    let ws = build(spec)?;
    let Users::Network { tasks, partition, .. } = &ws.users else {
        unreachable!("dataset family builds network users")
    };
    atomic_write(&dir.join("partition.csv"), partition_csv(&partition.assignments).as_bytes())?;
    let dists = partition
        .users
        .iter()
        .map(label_distribution)
        .collect::<perfed_core::Result<Vec<_>>>()?;
    let w1 = w1_to_mixture(&dists, |a: &usize, b: &usize| if a == b { 0.0 } else { 1.0 })?;
    let rng = RngStream::new(spec.seed).child(Purpose::Custom(0x5111));
    let probes = vec![ws.w0.clone()];
    let (gg2, gh2) = estimate_gamma(tasks, &probes, DEFAULT_HVP_PROBES, &rng)?;
    let b = tasks
        .iter()
        .map(|t| t.exact_grad(&ws.w0).expect("full-data oracle").norm())
        .fold(0.0, f64::max);
    let (l, _, _) = estimate_smoothness(tasks, &probes, 10, &rng)?;
    let similarity = SimilarityReport {
        gamma_g2: gg2,
        gamma_h2: gh2,
        gamma_h2_is_lower_bound: true,
        tv: tv_to_mixture(&dists)?,
        w1: Some(w1),
        tv_bound: Some(tv_gamma_bound(&dists, b, l)?),
        w1_bound: None,
    };
    let summary = PartitionSummary {
        users: partition.users.len(),
        counts: partition.users.iter().map(|u| u.class_counts()).collect(),
        similarity,
    };
    write_json(&dir.join("similarity.json"), &summary)?;
    write_timing(&dir, "partition", started, clock)?;
    Ok(summary)
}

/// Post-personalization quality of each arm over `compare.seeds` seeds.
pub fn compare_runs(spec: &RunSpec, ws: &Workspace) -> Result<Vec<ArmSummary>, CliError> {
    let mut rows = Vec::new();
    for &arm in &spec.compare.arms {
        let mut losses = Vec::new();
        let mut accs = Vec::new();
        for s in 0..spec.compare.seeds {
            let mut cfg = federation_config(spec, &ws.constants, Some(arm))?;
            cfg.seed = spec.seed + s as u64;
            cfg.stationarity = Stationarity::Off;
            cfg.materialize_all_traces = false;
            let w = run_with_sink(ws, &cfg, |_| Ok(()))?;
            let ev = evaluate(&ws.users, &w, spec.estimator.alpha)?;
            losses.push(ev.personalized_loss);
            if let Some(a) = ev.personalized_accuracy {
                accs.push(a);
            }
        }
        let has_acc = !accs.is_empty();
        rows.push(ArmSummary {
            arm: arm.name().to_string(),
            loss: mean_ci95(&losses),
            accuracy: has_acc.then(|| mean_ci95(&accs)),
            per_seed_loss: losses,
            per_seed_accuracy: has_acc.then_some(accs),
        });
    }
    Ok(rows)
}

/// `compare`: the summary table as JSON and text.
pub fn compare(spec: &RunSpec, out_dir: &Path) -> Result<Vec<ArmSummary>, CliError> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let dir = prepare_dir(out_dir)?;
    let ws = build(spec)?;
    let rows = compare_runs(spec, &ws)?;
    write_json(&dir.join("summary.json"), &rows)?;
    atomic_write(&dir.join("summary.txt"), render_summary(&rows).as_bytes())?;
    write_timing(&dir, "compare", started, clock)?;
    Ok(rows)
}
