//! Run configuration: TOML schema, per-problem defaults and evaluation points.
//!
//! A configuration file looks like
//!
//! ```toml
//! problem = "poisson"     # poisson | quadratic | dividend
//! dim = 2
//! seed = 7
//! concurrency = 8
//!
//! [params]                # r, b (poisson); r (quadratic); r, K, delta, rho, a, q, cutoff_fraction (dividend)
//! r = 0.5
//!
//! [grid]
//! horizon = 0.5
//! steps = 500
//!
//! [training]
//! epochs = 200
//!
//! [points]
//! diagonal = { count = 15, from = -0.35, to = 0.35 }
//! ```
//!
//! Only `problem` and `dim` are required; everything else falls back to the
//! defaults of [`RunConfig::defaults`]. Unknown keys are errors.

use std::fmt;
use std::path::PathBuf;

use elliptic_bsde::neural::AdamConfig;
use elliptic_bsde::problems::{intensity_matrix, Dividend, DividendParams, Poisson, QuadraticGradient};
use elliptic_bsde::solver::{LrSchedule, TrainConfig};
use elliptic_bsde::{ExitRule, Problem};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{}{message}", location(*line, *column))]
    Parse { line: Option<usize>, column: Option<usize>, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("line {l}, column {c}: "),
        (Some(l), None) => format!("line {l}: "),
        _ => String::new(),
    }
}

fn invalid(key: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), message: message.to_string() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson,
    Quadratic,
    Dividend,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Poisson => "poisson",
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::Dividend => "dividend",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "poisson" => Ok(ProblemKind::Poisson),
            "quadratic" => Ok(ProblemKind::Quadratic),
            "dividend" => Ok(ProblemKind::Dividend),
            other => Err(format!("unknown problem {other:?} (expected poisson, quadratic or dividend)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemConfig {
    Poisson { dim: usize, r: f64, b: f64 },
    Quadratic { dim: usize, r: f64 },
    Dividend(DividendParams),
}

impl ProblemConfig {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemConfig::Poisson { .. } => ProblemKind::Poisson,
            ProblemConfig::Quadratic { .. } => ProblemKind::Quadratic,
            ProblemConfig::Dividend(_) => ProblemKind::Dividend,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemConfig::Poisson { dim, .. } | ProblemConfig::Quadratic { dim, .. } => *dim,
            ProblemConfig::Dividend(p) => p.dim,
        }
    }

    pub fn build(&self) -> elliptic_bsde::Result<Box<dyn Problem>> {
        Ok(match self {
            ProblemConfig::Poisson { dim, r, b } => Box::new(Poisson::new(*dim, *r, *b)?),
            ProblemConfig::Quadratic { dim, r } => Box::new(QuadraticGradient::new(*dim, *r)?),
            ProblemConfig::Dividend(p) => Box::new(Dividend::new(p.clone())?),
        })
    }
}

/// Where the solution is evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PointSpec {
    /// `count` points `(x, ..., x)` with `x` evenly spaced over `[from, to]`.
    Diagonal { count: usize, from: f64, to: f64 },
    /// `count` copies of `base` whose coordinate `axis` (1-based) runs evenly over `[from, to]`.
    Sweep { count: usize, axis: usize, from: f64, to: f64, base: Vec<f64> },
    /// Explicit points.
    List(Vec<Vec<f64>>),
}

/// One evaluation point and its plotting coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    /// The swept coordinate, or `x_1` for explicit points.
    pub coordinate: f64,
    pub x: Vec<f64>,
}

fn linspace(count: usize, from: f64, to: f64) -> Vec<f64> {
    if count == 1 {
        return vec![from];
    }
    (0..count).map(|i| from + (to - from) * i as f64 / (count - 1) as f64).collect()
}

impl PointSpec {
    pub fn points(&self, dim: usize) -> Result<Vec<Point>, ConfigError> {
        let points: Vec<Point> = match self {
            PointSpec::Diagonal { count, from, to } => {
                if *count == 0 {
                    return Err(invalid("points.diagonal.count", "must be at least 1"));
                }
                linspace(*count, *from, *to).into_iter().map(|c| Point { coordinate: c, x: vec![c; dim] }).collect()
            }
            PointSpec::Sweep { count, axis, from, to, base } => {
                if *count == 0 {
                    return Err(invalid("points.sweep.count", "must be at least 1"));
                }
                if *axis == 0 || *axis > dim {
                    return Err(invalid("points.sweep.axis", format!("must lie in 1..={dim}")));
                }
                if base.len() != dim {
                    return Err(invalid("points.sweep.base", format!("has length {}, expected {dim}", base.len())));
                }
                linspace(*count, *from, *to)
                    .into_iter()
                    .map(|c| {
                        let mut x = base.clone();
                        x[axis - 1] = c;
                        Point { coordinate: c, x }
                    })
                    .collect()
            }
            PointSpec::List(list) => {
                if list.is_empty() {
                    return Err(invalid("points.list", "needs at least one point"));
                }
                for (i, x) in list.iter().enumerate() {
                    if x.len() != dim {
                        return Err(invalid("points.list", format!("point {i} has length {}, expected {dim}", x.len())));
                    }
                }
                list.iter().map(|x| Point { coordinate: x[0], x: x.clone() }).collect()
            }
        };
        if points.iter().any(|p| p.x.iter().any(|v| !v.is_finite())) {
            return Err(invalid("points", "coordinates must be finite"));
        }
        Ok(points)
    }

    /// Parses the command-line forms `diagonal:COUNT[:FROM:TO]`,
    /// `sweep:AXIS:COUNT:FROM:TO` (base from `default`) and
    /// `X1,X2,...;Y1,Y2,...`.
    pub fn parse_cli(spec: &str, default: &PointSpec) -> Result<PointSpec, ConfigError> {
        let bad = |msg: &str| invalid("--points", format!("{msg} in {spec:?}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("bad integer"));
        let parts: Vec<&str> = spec.split(':').collect();
        match parts[0] {
            "diagonal" => match (parts.len(), default) {
                (2, PointSpec::Diagonal { from, to, .. }) => {
                    Ok(PointSpec::Diagonal { count: int(parts[1])?, from: *from, to: *to })
                }
                (4, _) => Ok(PointSpec::Diagonal { count: int(parts[1])?, from: num(parts[2])?, to: num(parts[3])? }),
                _ => Err(bad("expected diagonal:COUNT:FROM:TO")),
            },
            "sweep" => {
                if parts.len() != 5 {
                    return Err(bad("expected sweep:AXIS:COUNT:FROM:TO"));
                }
                let base = match default {
                    PointSpec::Sweep { base, .. } => base.clone(),
                    PointSpec::Diagonal { .. } | PointSpec::List(_) => Vec::new(),
                };
                Ok(PointSpec::Sweep {
                    axis: int(parts[1])?,
                    count: int(parts[2])?,
                    from: num(parts[3])?,
                    to: num(parts[4])?,
                    base,
                })
            }
            _ => {
                let list = spec
                    .split(';')
                    .map(|p| p.split(',').map(num).collect::<Result<Vec<f64>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(PointSpec::List(list))
            }
        }
    }
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub training: TrainConfig,
    pub points: PointSpec,
    /// Maximal number of points solved at the same time.
    pub concurrency: usize,
    pub seed: u64,
    /// Leave wall-clock columns empty so repeated runs give identical files.
    pub deterministic: bool,
    pub output: Option<PathBuf>,
}

/// Initial filter probabilities of the dividend problem.
pub fn default_filter(dim: usize) -> Vec<f64> {
    if dim == 2 {
        vec![0.5]
    } else {
        vec![1.0 / dim as f64; dim - 1]
    }
}

impl RunConfig {
    /// The tabulated setup of each problem in dimension `dim`.
    ///
    /// Poisson: `r = 0.5, b = 0.75, N = 500, E = 200` and `T = 4 r^2 / d`
    /// (0.5 for d = 2, 0.01 for d = 100), one subnetwork shared by all steps. Quadratic: `r = 1, N = 100,
    /// E = 500`, `T = 10 r^2 / d` (5 and 0.1). Dividend: standard
    /// parameters, `N = 100, T = 5, E = 500`. All use `M = 64`, 256
    /// validation paths, 5 runs and a tail of 3.
    pub fn defaults(kind: ProblemKind, dim: usize) -> Result<Self, ConfigError> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        let problem = match kind {
            ProblemKind::Poisson => ProblemConfig::Poisson { dim, r: 0.5, b: 0.75 },
            ProblemKind::Quadratic => ProblemConfig::Quadratic { dim, r: 1.0 },
            ProblemKind::Dividend => {
                ProblemConfig::Dividend(DividendParams::standard(dim).map_err(|e| invalid("dim", e))?)
            }
        };
        let mut config = Self {
            training: TrainConfig::default(),
            points: PointSpec::List(vec![vec![0.0; dim]]),
            problem,
            concurrency: 8,
            seed: 0,
            deterministic: false,
            output: None,
        };
        config.apply_problem_defaults();
        Ok(config)
    }

    /// Grid, training and point defaults that depend on the problem parameters.
    fn apply_problem_defaults(&mut self) {
        let d = self.problem.dim();
        let t = &mut self.training;
        *t = TrainConfig {
            batch_size: 64,
            validation_size: 256,
            gamma: 2.0,
            runs: 5,
            tail: 3,
            optimizer: AdamConfig::default(),
            ..TrainConfig::default()
        };
        let diagonal = |r: f64| {
            let edge = r / (d as f64).sqrt();
            PointSpec::Diagonal { count: 15, from: -edge, to: edge }
        };
        match &self.problem {
            ProblemConfig::Poisson { r, .. } => {
                t.horizon = 4.0 * r * r / d as f64;
                t.steps = 500;
                t.epochs = 200;
                t.value_lr_scale = 10.0;
                t.schedule = LrSchedule::Geometric { factor: 0.96, start: 60 };
                t.shared_subnet = true;
                self.points = diagonal(*r);
            }
            ProblemConfig::Quadratic { r, .. } => {
                t.horizon = 10.0 * r * r / d as f64;
                t.steps = 100;
                t.epochs = 500;
                t.value_lr_scale = 40.0;
                t.schedule = LrSchedule::Geometric { factor: 0.99, start: 100 };
                self.points = diagonal(*r);
            }
            ProblemConfig::Dividend(p) => {
                t.horizon = 5.0;
                t.steps = 100;
                t.epochs = 500;
                t.value_lr_scale = 40.0;
                t.schedule = LrSchedule::Geometric { factor: 0.99, start: 100 };
                let mut base = default_filter(d);
                base.push(0.0);
                self.points = PointSpec::Sweep { count: 15, axis: d, from: 0.0, to: p.r, base };
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.problem.build().map_err(|e| invalid("params", e))?;
        self.training.validate().map_err(|e| invalid("training", e))?;
        self.points.points(self.problem.dim())?;
        if self.concurrency == 0 {
            return Err(invalid("concurrency", "must be at least 1"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", format!("must not exceed {}", i64::MAX)));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// TOML document

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub problem: Option<String>,
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concurrency: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deterministic: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "RawParams::is_empty")]
    pub params: RawParams,
    #[serde(default)]
    pub grid: RawGrid,
    #[serde(default)]
    pub training: RawTraining,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<PointSpec>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_fraction: Option<f64>,
}

impl RawParams {
    fn is_empty(&self) -> bool {
        self.r.is_none()
            && self.b.is_none()
            && self.k.is_none()
            && self.delta.is_none()
            && self.rho.is_none()
            && self.a.is_none()
            && self.q.is_none()
            && self.cutoff_fraction.is_none()
    }
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_rule: Option<ExitRule>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Geometric,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawTraining {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_lr_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_start: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shared_subnet: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_paths: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freeze_gradient_model: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Reads the TOML document without resolving defaults.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(text).map_err(|e: toml::de::Error| {
        let (line, column) = match e.span() {
            Some(span) => {
                let (l, c) = line_column(text, span.start);
                (Some(l), Some(c))
            }
            None => (None, None),
        };
        ConfigError::Parse { line, column, message: e.message().to_string() }
    })
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    resolve(parse_raw(text)?)
}

/// Fills the defaults of the chosen problem into `raw` and validates the result.
pub fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let kind: ProblemKind = raw
        .problem
        .as_deref()
        .ok_or_else(|| invalid("problem", "is required"))?
        .parse()
        .map_err(|e: String| invalid("problem", e))?;
    let dim = raw.dim.ok_or_else(|| invalid("dim", "is required"))?;
    let mut config = RunConfig::defaults(kind, dim)?;

    let p = raw.params;
    let reject = |key: &str, present: bool| {
        if present {
            Err(invalid(&format!("params.{key}"), format!("is not a parameter of the {} problem", kind.name())))
        } else {
            Ok(())
        }
    };
    match &mut config.problem {
        ProblemConfig::Poisson { r, b, .. } => {
            reject("K", p.k.is_some())?;
            reject("delta", p.delta.is_some())?;
            reject("rho", p.rho.is_some())?;
            reject("a", p.a.is_some())?;
            reject("q", p.q.is_some())?;
            reject("cutoff_fraction", p.cutoff_fraction.is_some())?;
            *r = p.r.unwrap_or(*r);
            *b = p.b.unwrap_or(*b);
        }
        ProblemConfig::Quadratic { r, .. } => {
            reject("b", p.b.is_some())?;
            reject("K", p.k.is_some())?;
            reject("delta", p.delta.is_some())?;
            reject("rho", p.rho.is_some())?;
            reject("a", p.a.is_some())?;
            reject("q", p.q.is_some())?;
            reject("cutoff_fraction", p.cutoff_fraction.is_some())?;
            *r = p.r.unwrap_or(*r);
        }
        ProblemConfig::Dividend(d) => {
            reject("b", p.b.is_some())?;
            d.r = p.r.unwrap_or(d.r);
            d.k = p.k.unwrap_or(d.k);
            d.delta = p.delta.unwrap_or(d.delta);
            d.rho = p.rho.unwrap_or(d.rho);
            if let Some(a) = p.a {
                d.a = a;
            }
            if let Some(q) = p.q {
                d.q = q;
            }
            d.cutoff_fraction = p.cutoff_fraction.unwrap_or(d.cutoff_fraction);
            d.validate().map_err(|e| invalid("params", e))?;
        }
    }
    // Defaults such as T and the point range depend on r.
    config.apply_problem_defaults();

    let t = &mut config.training;
    let g = raw.grid;
    t.horizon = g.horizon.unwrap_or(t.horizon);
    t.steps = g.steps.unwrap_or(t.steps);
    t.gamma = g.gamma.unwrap_or(t.gamma);
    t.exit_rule = g.exit_rule.unwrap_or(t.exit_rule);

    let tr = raw.training;
    t.epochs = tr.epochs.unwrap_or(t.epochs);
    t.batch_size = tr.batch_size.unwrap_or(t.batch_size);
    t.validation_size = tr.validation_size.unwrap_or(t.validation_size);
    t.optimizer.learning_rate = tr.learning_rate.unwrap_or(t.optimizer.learning_rate);
    t.optimizer.beta1 = tr.beta1.unwrap_or(t.optimizer.beta1);
    t.optimizer.beta2 = tr.beta2.unwrap_or(t.optimizer.beta2);
    t.optimizer.epsilon = tr.epsilon.unwrap_or(t.optimizer.epsilon);
    t.value_lr_scale = tr.value_lr_scale.unwrap_or(t.value_lr_scale);
    t.schedule = resolve_schedule(t.schedule, tr.schedule, tr.decay_factor, tr.decay_start)?;
    t.runs = tr.runs.unwrap_or(t.runs);
    t.tail = tr.tail.unwrap_or(t.tail);
    if tr.hidden.is_some() {
        t.hidden = tr.hidden;
    }
    t.shared_subnet = tr.shared_subnet.unwrap_or(t.shared_subnet);
    t.fixed_paths = tr.fixed_paths.unwrap_or(t.fixed_paths);
    t.freeze_gradient_model = tr.freeze_gradient_model.unwrap_or(t.freeze_gradient_model);
    t.threads = tr.threads.unwrap_or(t.threads);

    if let Some(points) = raw.points {
        config.points = points;
    }
    config.seed = raw.seed.unwrap_or(config.seed);
    config.concurrency = raw.concurrency.unwrap_or(config.concurrency);
    config.deterministic = raw.deterministic.unwrap_or(config.deterministic);
    config.output = raw.output;
    config.validate()?;
    Ok(config)
}

fn resolve_schedule(
    default: LrSchedule,
    kind: Option<ScheduleKind>,
    factor: Option<f64>,
    start: Option<usize>,
) -> Result<LrSchedule, ConfigError> {
    let (default_factor, default_start) = match default {
        LrSchedule::Geometric { factor, start } => (factor, start),
        LrSchedule::Constant => (0.99, 0),
    };
    let kind = kind.unwrap_or(match default {
        LrSchedule::Constant => ScheduleKind::Constant,
        LrSchedule::Geometric { .. } => ScheduleKind::Geometric,
    });
    match kind {
        ScheduleKind::Constant => {
            if factor.is_some() || start.is_some() {
                return Err(invalid("training.decay_factor", "needs schedule = \"geometric\""));
            }
            Ok(LrSchedule::Constant)
        }
        ScheduleKind::Geometric => Ok(LrSchedule::Geometric {
            factor: factor.unwrap_or(default_factor),
            start: start.unwrap_or(default_start),
        }),
    }
}

/// The TOML document that [`parse_config`] turns back into `config`.
pub fn to_raw(config: &RunConfig) -> RawConfig {
    let t = &config.training;
    let params = match &config.problem {
        ProblemConfig::Poisson { r, b, .. } => RawParams { r: Some(*r), b: Some(*b), ..Default::default() },
        ProblemConfig::Quadratic { r, .. } => RawParams { r: Some(*r), ..Default::default() },
        ProblemConfig::Dividend(d) => {
            let standard = DividendParams::standard(d.dim).ok();
            let standard_q = intensity_matrix(d.dim).ok();
            RawParams {
                r: Some(d.r),
                k: Some(d.k),
                delta: Some(d.delta),
                rho: Some(d.rho),
                a: (standard.map(|s| s.a) != Some(d.a.clone())).then(|| d.a.clone()),
                q: (standard_q != Some(d.q.clone())).then(|| d.q.clone()),
                cutoff_fraction: Some(d.cutoff_fraction),
                ..Default::default()
            }
        }
    };
    let (schedule, decay_factor, decay_start) = match t.schedule {
        LrSchedule::Constant => (ScheduleKind::Constant, None, None),
        LrSchedule::Geometric { factor, start } => (ScheduleKind::Geometric, Some(factor), Some(start)),
    };
    RawConfig {
        problem: Some(config.problem.kind().name().to_string()),
        dim: Some(config.problem.dim()),
        seed: Some(config.seed),
        concurrency: Some(config.concurrency),
        deterministic: Some(config.deterministic),
        output: config.output.clone(),
        params,
        grid: RawGrid {
            horizon: Some(t.horizon),
            steps: Some(t.steps),
            gamma: Some(t.gamma),
            exit_rule: Some(t.exit_rule),
        },
        training: RawTraining {
            epochs: Some(t.epochs),
            batch_size: Some(t.batch_size),
            validation_size: Some(t.validation_size),
            learning_rate: Some(t.optimizer.learning_rate),
            beta1: Some(t.optimizer.beta1),
            beta2: Some(t.optimizer.beta2),
            epsilon: Some(t.optimizer.epsilon),
            value_lr_scale: Some(t.value_lr_scale),
            schedule: Some(schedule),
            decay_factor,
            decay_start,
            runs: Some(t.runs),
            tail: Some(t.tail),
            hidden: t.hidden.clone(),
            shared_subnet: Some(t.shared_subnet),
            fixed_paths: Some(t.fixed_paths),
            freeze_gradient_model: Some(t.freeze_gradient_model),
            threads: Some(t.threads),
        },
        points: Some(config.points.clone()),
    }
}

/// Writes `config` as a complete TOML document.
pub fn emit_config(config: &RunConfig) -> String {
    toml::to_string(&to_raw(config)).expect("configuration serializes to TOML")
}
