//! Run specifications: a sectioned TOML file resolved against a profile.
//!
//! Every key is optional; absent keys take the profile default. The resolved
//! [`RunSpec`] serializes with every key present, so parsing its own output
//! returns an equal spec.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use perfed_core::federation::{Algorithm, Stationarity};
use perfed_core::EstimatorKind;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(CliError::Config(format!("profile: expected desk or paper, got {other:?}"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskFamily {
    #[serde(rename = "quadratic")]
    Quadratic,
    #[serde(rename = "logistic")]
    Logistic,
    #[serde(rename = "mlp-mnist-subset")]
    MlpMnistSubset,
}

impl TaskFamily {
    pub fn uses_dataset(self) -> bool {
        !matches!(self, TaskFamily::Quadratic)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Diminishing,
}

/// One arm of a comparison run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "fedavg")]
    FedAvg,
    #[serde(rename = "perfedavg-fo")]
    PerFedAvgFo,
    #[serde(rename = "perfedavg-hf")]
    PerFedAvgHf,
    #[serde(rename = "perfedavg-so")]
    PerFedAvgStochastic,
    #[serde(rename = "perfedavg-exact")]
    PerFedAvgExact,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::FedAvg => "fedavg",
            Arm::PerFedAvgFo => "perfedavg-fo",
            Arm::PerFedAvgHf => "perfedavg-hf",
            Arm::PerFedAvgStochastic => "perfedavg-so",
            Arm::PerFedAvgExact => "perfedavg-exact",
        }
    }

    /// Algorithm and estimator kind; FedAvg keeps the configured estimator for
    /// its batch sizes.
    pub fn setup(self, configured: EstimatorKind) -> (Algorithm, EstimatorKind) {
        match self {
            Arm::FedAvg => (Algorithm::FedAvg, configured),
            Arm::PerFedAvgFo => (Algorithm::PerFedAvg, EstimatorKind::FirstOrder),
            Arm::PerFedAvgHf => (Algorithm::PerFedAvg, EstimatorKind::HessianFree),
            Arm::PerFedAvgStochastic => (Algorithm::PerFedAvg, EstimatorKind::Stochastic),
            Arm::PerFedAvgExact => (Algorithm::PerFedAvg, EstimatorKind::Exact),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub family: TaskFamily,
    /// Seed for building the users; training randomness uses the run seed.
    pub seed: u64,
    /// Declared smoothness `L`, checked against `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    pub dim: usize,
    pub grad_spread: f64,
    pub hess_spread: f64,
    pub grad_noise: f64,
    pub hess_noise: f64,
    pub curvature_min: f64,
    pub curvature_max: f64,
    pub base_offset: f64,
    pub domain_radius: f64,
    pub images: PathBuf,
    pub labels: PathBuf,
    pub hidden: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub a: usize,
    pub diff_hetero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationSection {
    pub n: usize,
    pub r: f64,
    pub tau: usize,
    pub rounds: usize,
    /// Absent means `1/(10 tau L_F)` when the constants are known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub schedule: ScheduleKind,
    pub algorithm: Algorithm,
    pub materialize_all_traces: bool,
    pub stationarity: Stationarity,
    pub enforce_step_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: EstimatorKind,
    pub alpha: f64,
    pub d_inner: usize,
    pub d_outer: usize,
    pub d_hessian: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub enabled: bool,
    pub mc_trials: usize,
    pub probes: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub seeds: usize,
    pub arms: Vec<Arm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// A fully resolved and validated run specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub profile: Profile,
    pub seed: u64,
    pub task: TaskSpec,
    pub partition: PartitionSection,
    pub federation: FederationSection,
    pub estimator: EstimatorSection,
    pub diagnostics: DiagnosticsSection,
    pub compare: CompareSection,
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    family: Option<TaskFamily>,
    seed: Option<u64>,
    smoothness: Option<f64>,
    dim: Option<usize>,
    grad_spread: Option<f64>,
    hess_spread: Option<f64>,
    grad_noise: Option<f64>,
    hess_noise: Option<f64>,
    curvature_min: Option<f64>,
    curvature_max: Option<f64>,
    base_offset: Option<f64>,
    domain_radius: Option<f64>,
    images: Option<PathBuf>,
    labels: Option<PathBuf>,
    hidden: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    a: Option<usize>,
    diff_hetero: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFederation {
    n: Option<usize>,
    r: Option<f64>,
    tau: Option<usize>,
    rounds: Option<usize>,
    beta: Option<f64>,
    schedule: Option<ScheduleKind>,
    algorithm: Option<Algorithm>,
    materialize_all_traces: Option<bool>,
    stationarity: Option<Stationarity>,
    enforce_step_bound: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    kind: Option<EstimatorKind>,
    alpha: Option<f64>,
    d_inner: Option<usize>,
    d_outer: Option<usize>,
    d_hessian: Option<usize>,
    delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    enabled: Option<bool>,
    mc_trials: Option<usize>,
    probes: Option<usize>,
    pairs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    seeds: Option<usize>,
    arms: Option<Vec<Arm>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    profile: Option<Profile>,
    seed: Option<u64>,
    #[serde(default)]
    task: RawTask,
    #[serde(default)]
    partition: RawPartition,
    #[serde(default)]
    federation: RawFederation,
    #[serde(default)]
    estimator: RawEstimator,
    #[serde(default)]
    diagnostics: RawDiagnostics,
    #[serde(default)]
    compare: RawCompare,
    #[serde(default)]
    output: RawOutput,
}

/// Default data location, relative to the working directory.
pub const DEFAULT_IMAGES: &str = "data/digits/digits-images-idx3-ubyte";
pub const DEFAULT_LABELS: &str = "data/digits/digits-labels-idx1-ubyte";

impl RunSpec {
    /// All defaults for `profile` and the quadratic family.
    pub fn defaults(profile: Profile) -> RunSpec {
        parse_with(RawSpec::default(), Some(profile)).expect("defaults are valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec serializes")
    }
}

/// Parses and validates a run spec. `profile` overrides the file's profile.
pub fn parse_run_spec(text: &str, profile: Option<Profile>) -> Result<RunSpec, CliError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
    parse_with(raw, profile)
}

pub fn load_run_spec(path: &std::path::Path, profile: Option<Profile>) -> Result<RunSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_run_spec(&text, profile)
}

fn parse_with(raw: RawSpec, profile: Option<Profile>) -> Result<RunSpec, CliError> {
    let profile = profile.or(raw.profile).unwrap_or_default();
    let paper = profile == Profile::Paper;
    let t = raw.task;
    let family = t.family.unwrap_or(TaskFamily::Quadratic);
    let dataset = family.uses_dataset();
    let task = TaskSpec {
        family,
        seed: t.seed.unwrap_or(0),
        smoothness: t.smoothness,
        dim: t.dim.unwrap_or(5),
        grad_spread: t.grad_spread.unwrap_or(0.5),
        hess_spread: t.hess_spread.unwrap_or(0.1),
        grad_noise: t.grad_noise.unwrap_or(0.2),
        hess_noise: t.hess_noise.unwrap_or(0.1),
        curvature_min: t.curvature_min.unwrap_or(0.5),
        curvature_max: t.curvature_max.unwrap_or(1.0),
        base_offset: t.base_offset.unwrap_or(1.0),
        domain_radius: t.domain_radius.unwrap_or(1.0),
        images: t.images.unwrap_or_else(|| DEFAULT_IMAGES.into()),
        labels: t.labels.unwrap_or_else(|| DEFAULT_LABELS.into()),
        hidden: t.hidden.unwrap_or_else(|| match family {
            TaskFamily::Logistic => Vec::new(),
            _ => vec![80, 60],
        }),
    };
    let partition = PartitionSection {
        a: raw.partition.a.unwrap_or(if paper { 196 } else { 20 }),
        diff_hetero: raw.partition.diff_hetero.unwrap_or(false),
    };
    let f = raw.federation;
    let dataset_beta = if paper { 0.001 } else { 0.05 };
    let federation = FederationSection {
        n: f.n.unwrap_or(if paper { 50 } else { 10 }),
        r: f.r.unwrap_or(if paper { 0.2 } else { 0.5 }),
        tau: f.tau.unwrap_or(if paper { 10 } else { 4 }),
        rounds: f.rounds.unwrap_or(if paper { 1000 } else { 100 }),
        beta: f.beta.or((paper || dataset).then_some(dataset_beta)),
        schedule: f.schedule.unwrap_or(ScheduleKind::Constant),
        algorithm: f.algorithm.unwrap_or(Algorithm::PerFedAvg),
        materialize_all_traces: f.materialize_all_traces.unwrap_or(false),
        stationarity: f.stationarity.unwrap_or(if dataset { Stationarity::Off } else { Stationarity::Report }),
        enforce_step_bound: f.enforce_step_bound.unwrap_or(true),
    };
    let e = raw.estimator;
    let batch = if paper { 40 } else { 10 };
    let estimator = EstimatorSection {
        kind: e.kind.unwrap_or(EstimatorKind::HessianFree),
        alpha: e.alpha.unwrap_or(match (paper, dataset) {
            (true, _) => 0.01,
            (false, true) => 0.05,
            (false, false) => 0.3,
        }),
        d_inner: e.d_inner.unwrap_or(batch),
        d_outer: e.d_outer.unwrap_or(batch),
        d_hessian: e.d_hessian.unwrap_or(batch),
        delta: e.delta,
    };
    let d = raw.diagnostics;
    let diagnostics = DiagnosticsSection {
        enabled: d.enabled.unwrap_or(true),
        mc_trials: d.mc_trials.unwrap_or(10_000),
        probes: d.probes.unwrap_or(20),
        pairs: d.pairs.unwrap_or(1000),
    };
    let compare = CompareSection {
        seeds: raw.compare.seeds.unwrap_or(5),
        arms: raw
            .compare
            .arms
            .unwrap_or_else(|| vec![Arm::FedAvg, Arm::PerFedAvgFo, Arm::PerFedAvgHf]),
    };
    let output = OutputSection {
        dir: raw.output.dir.unwrap_or_else(|| "out".into()),
    };
    let spec = RunSpec {
        profile,
        seed: raw.seed.unwrap_or(0),
        task,
        partition,
        federation,
        estimator,
        diagnostics,
        compare,
        output,
    };
    validate(&spec)?;
    Ok(spec)
}

fn field(name: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{name}: {msg}"))
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(field(name, format!("must be positive and finite, got {x}")));
    }
    Ok(())
}

fn nonnegative(name: &str, x: f64) -> Result<(), CliError> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(field(name, format!("must be nonnegative and finite, got {x}")));
    }
    Ok(())
}

/// Semantic checks; each failure names the offending field.
pub fn validate(spec: &RunSpec) -> Result<(), CliError> {
    let t = &spec.task;
    if t.dim == 0 {
        return Err(field("task.dim", "must be at least 1"));
    }
    for (name, x) in [
        ("task.grad_spread", t.grad_spread),
        ("task.hess_spread", t.hess_spread),
        ("task.grad_noise", t.grad_noise),
        ("task.hess_noise", t.hess_noise),
        ("task.base_offset", t.base_offset),
    ] {
        nonnegative(name, x)?;
    }
    positive("task.curvature_min", t.curvature_min)?;
    positive("task.domain_radius", t.domain_radius)?;
    if !(t.curvature_max >= t.curvature_min) || !t.curvature_max.is_finite() {
        return Err(field("task.curvature_max", "must be finite and at least curvature_min"));
    }
    if let Some(l) = t.smoothness {
        positive("task.smoothness", l)?;
    }
    if t.hidden.contains(&0) {
        return Err(field("task.hidden", "layer widths must be positive"));
    }
    if t.family == TaskFamily::Logistic && !t.hidden.is_empty() {
        return Err(field("task.hidden", "the logistic family has no hidden layers"));
    }
    if t.family.uses_dataset() {
        if spec.partition.a < 2 || spec.partition.a % 2 != 0 {
            return Err(field("partition.a", format!("must be even and at least 2, got {}", spec.partition.a)));
        }
        if spec.federation.n < 2 || spec.federation.n % 2 != 0 {
            return Err(field(
                "federation.n",
                format!("dataset tasks need an even user count, got {}", spec.federation.n),
            ));
        }
    }

    let f = &spec.federation;
    if f.n == 0 {
        return Err(field("federation.n", "must be at least 1"));
    }
    if !(f.r > 0.0 && f.r <= 1.0) {
        return Err(field("federation.r", format!("must lie in (0, 1], got {}", f.r)));
    }
    if f.tau == 0 {
        return Err(field("federation.tau", "must be at least 1"));
    }
    if f.rounds == 0 {
        return Err(field("federation.rounds", "must be at least 1"));
    }
    if let Some(b) = f.beta {
        nonnegative("federation.beta", b)?;
    }
    if f.schedule == ScheduleKind::Diminishing && f.beta.is_none() {
        return Err(field("federation.beta", "a diminishing schedule needs an explicit initial beta"));
    }

    let e = &spec.estimator;
    nonnegative("estimator.alpha", e.alpha)?;
    for (name, x) in [
        ("estimator.d_inner", e.d_inner),
        ("estimator.d_outer", e.d_outer),
        ("estimator.d_hessian", e.d_hessian),
    ] {
        if x == 0 {
            return Err(field(name, "batch sizes must be at least 1"));
        }
    }
    if let Some(d) = e.delta {
        positive("estimator.delta", d)?;
    }
    if let Some(l) = t.smoothness {
        if e.alpha * l > 1.0 + 1e-12 {
            return Err(field(
                "estimator.alpha",
                format!("alpha L <= 1 required (alpha = {}, L = {l})", e.alpha),
            ));
        }
    }

    if spec.diagnostics.mc_trials < 2 {
        return Err(field("diagnostics.mc_trials", "must be at least 2"));
    }
    if spec.diagnostics.probes == 0 || spec.diagnostics.pairs == 0 {
        return Err(field("diagnostics", "probes and pairs must be at least 1"));
    }
    if spec.compare.seeds == 0 {
        return Err(field("compare.seeds", "must be at least 1"));
    }
    if spec.compare.arms.is_empty() {
        return Err(field("compare.arms", "list at least one arm"));
    }
    Ok(())
}
