use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::neural::{Adam, AdamConfig, NetworkLayout};
use crate::problem::Problem;
use crate::rng::derive_seed;
use crate::sde::{simulate_into, ExitRule, PathBatch, SimulationOptions};

use super::rollout::{loss, rollout, rollout_recorded, Tape};
use super::state::SolverState;

/// Learning rate as a function of the epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr * factor^(epoch - start)` from epoch `start` (0-based) on.
    Geometric { factor: f64, start: usize },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Geometric { factor, start } => base * factor.powi(epoch.saturating_sub(start) as i32),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_size: usize,
    pub horizon: f64,
    pub steps: usize,
    pub gamma: f64,
    pub exit_rule: ExitRule,
    pub optimizer: AdamConfig,
    pub schedule: LrSchedule,
    /// Multiplier of the learning rate of `u0` relative to all other parameters.
    pub value_lr_scale: f64,
    /// Independent restarts averaged into the estimate.
    pub runs: usize,
    /// Number of final epochs whose `u0` is averaged per run.
    pub tail: usize,
    /// Hidden widths; `None` means [`NetworkLayout::default_for`].
    pub hidden: Option<Vec<usize>>,
    pub shared_subnet: bool,
    /// Simulate the training and validation batches once instead of every epoch.
    pub fixed_paths: bool,
    /// Keep `z0` and all networks at zero and train `u0` alone.
    pub freeze_gradient_model: bool,
    /// Threads for path simulation; results do not depend on it.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            validation_size: 256,
            horizon: 0.5,
            steps: 500,
            gamma: 2.0,
            exit_rule: ExitRule::Bridge,
            optimizer: AdamConfig::default(),
            schedule: LrSchedule::Constant,
            value_lr_scale: 1.0,
            runs: 5,
            tail: 3,
            hidden: None,
            shared_subnet: false,
            fixed_paths: false,
            freeze_gradient_model: false,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.validation_size == 0 {
            return Err(Error::arg("batch size and validation size must be at least 1"));
        }
        if self.runs == 0 || self.tail == 0 {
            return Err(Error::arg("runs and tail must be at least 1"));
        }
        if self.epochs > 0 && self.tail > self.epochs {
            return Err(Error::arg(format!("tail ({}) exceeds epochs ({})", self.tail, self.epochs)));
        }
        let lr = self.optimizer.learning_rate;
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::arg("learning rate must be positive"));
        }
        if !(self.value_lr_scale.is_finite() && self.value_lr_scale > 0.0) {
            return Err(Error::arg("value learning-rate scale must be positive"));
        }
        if let LrSchedule::Geometric { factor, .. } = self.schedule {
            if !(factor.is_finite() && factor > 0.0) {
                return Err(Error::arg("decay factor must be positive"));
            }
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps, self.gamma)
    }

    pub fn layout(&self, dim: usize) -> Result<NetworkLayout> {
        match &self.hidden {
            Some(h) => NetworkLayout::new(dim, h.clone(), dim),
            None => Ok(NetworkLayout::default_for(dim)),
        }
    }

    fn simulation(&self) -> SimulationOptions {
        SimulationOptions { exit_rule: self.exit_rule, threads: self.threads.max(1) }
    }
}

/// Per-epoch record of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub seed: u64,
    pub initial_u0: f64,
    /// `u0` after each epoch's update.
    pub u0: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub history: RunHistory,
    /// `None` when the start point was outside the domain.
    pub state: Option<SolverState>,
}

/// Mean of the last `tail` `u0` snapshots, or the initial value when no
/// epoch was run.
pub fn tail_mean(history: &RunHistory, tail: usize) -> f64 {
    let h = &history.u0;
    if h.is_empty() {
        return history.initial_u0;
    }
    let k = tail.clamp(1, h.len());
    h[h.len() - k..].iter().sum::<f64>() / k as f64
}

/// Trains one run of the solver at `x0`.
///
/// Each epoch simulates a fresh training batch (unless `fixed_paths`),
/// rolls it out, takes one Adam step on all parameters and evaluates the
/// loss of an independent validation batch with the updated parameters.
pub fn train_single_run(problem: &dyn Problem, x0: &[f64], config: &TrainConfig, seed: u64) -> Result<TrainedRun> {
    config.validate()?;
    let d = problem.dim();
    if x0.len() != d {
        return Err(Error::arg(format!("start point has length {}, problem dimension is {d}", x0.len())));
    }
    if !problem.domain().contains(x0) {
        let g = problem.terminal_value(x0);
        return Ok(TrainedRun { history: RunHistory { seed, initial_u0: g, ..Default::default() }, state: None });
    }
    let grid = config.grid()?;
    let mut state = SolverState::new(problem, grid.steps(), config.layout(d)?, config.shared_subnet, seed)?;
    if config.freeze_gradient_model {
        state.freeze_gradient_model();
    }
    let mut history = RunHistory { seed, initial_u0: state.u0, ..Default::default() };
    let mut adam = Adam::new(config.optimizer, &state.group_sizes());
    let mut rates = vec![0.0; state.group_sizes().len()];
    let mut tape = Tape::default();
    let mut train = PathBatch::default();
    let mut valid = PathBatch::default();
    let sim = config.simulation();

    for epoch in 0..config.epochs {
        let tag = if config.fixed_paths { 0 } else { epoch as u64 };
        if epoch == 0 || !config.fixed_paths {
            let s_train = derive_seed(seed, &[2, tag]);
            let s_valid = derive_seed(seed, &[3, tag]);
            simulate_into(&mut train, problem, x0, &grid, config.batch_size, s_train, sim)?;
            simulate_into(&mut valid, problem, x0, &grid, config.validation_size, s_valid, sim)?;
        }
        let at_epoch = |e: Error| match e {
            Error::Training { reason, .. } => Error::Training { epoch: epoch + 1, reason },
            other => other,
        };

        let terminal = rollout_recorded(&train, &state, problem, &grid, &mut tape).map_err(at_epoch)?;
        let train_loss = loss(terminal, train.terminal_xi())?;
        if !train_loss.is_finite() {
            return Err(Error::Training { epoch: epoch + 1, reason: "non-finite training loss".into() });
        }
        let grads = tape.gradients(&train, &grid, &state, train.terminal_xi())?;
        let lr = config.schedule.rate(config.optimizer.learning_rate, epoch);
        rates.fill(lr);
        rates[0] = lr * config.value_lr_scale;
        adam.step_with_rates(&mut state.groups_mut(), &grads.groups(), &rates).map_err(at_epoch)?;
        if !state.is_finite() {
            return Err(Error::Training { epoch: epoch + 1, reason: "non-finite parameters after update".into() });
        }

        let val_terminal = rollout(&valid, &state, problem, &grid).map_err(at_epoch)?;
        let val_loss = loss(&val_terminal, valid.terminal_xi())?;
        if !val_loss.is_finite() {
            return Err(Error::Training { epoch: epoch + 1, reason: "non-finite validation loss".into() });
        }
        history.u0.push(state.u0);
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
    }
    Ok(TrainedRun { history, state: Some(state) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub status: RunStatus,
    pub history: RunHistory,
}

/// Aggregated estimate of `u(x0)` over independent runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x0: Vec<f64>,
    pub estimate: f64,
    pub runs: Vec<RunRecord>,
    pub tail: usize,
    /// The start point was outside the domain; the estimate is the boundary data.
    pub on_boundary: bool,
    pub seconds: f64,
    pub config: TrainConfig,
}

impl SolveResult {
    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.status != RunStatus::Ok).count()
    }

    /// Mean over successful runs of [`tail_mean`].
    pub fn recompute_estimate(&self) -> Option<f64> {
        aggregate(&self.runs, self.tail)
    }
}

fn aggregate(runs: &[RunRecord], tail: usize) -> Option<f64> {
    let ok: Vec<f64> = runs.iter().filter(|r| r.status == RunStatus::Ok).map(|r| tail_mean(&r.history, tail)).collect();
    if ok.is_empty() {
        None
    } else {
        Some(ok.iter().sum::<f64>() / ok.len() as f64)
    }
}

/// Runs `config.runs` independent trainings at `x0` (run `r` seeded with
/// `derive_seed(seed, [r])`) and averages their tail means.
///
/// Failed runs are recorded and left out of the average.
pub fn estimate_point(problem: &dyn Problem, x0: &[f64], config: &TrainConfig, seed: u64) -> Result<SolveResult> {
    config.validate()?;
    let start = Instant::now();
    let mut runs = Vec::with_capacity(config.runs);
    let on_boundary = x0.len() == problem.dim() && !problem.domain().contains(x0);
    for r in 0..config.runs {
        let run_seed = derive_seed(seed, &[r as u64]);
        match train_single_run(problem, x0, config, run_seed) {
            Ok(trained) => runs.push(RunRecord { status: RunStatus::Ok, history: trained.history }),
            Err(e @ Error::Argument(_)) => return Err(e),
            Err(e) => runs.push(RunRecord {
                status: RunStatus::Failed(e.to_string()),
                history: RunHistory { seed: run_seed, ..Default::default() },
            }),
        }
    }
    let estimate = aggregate(&runs, config.tail).ok_or_else(|| Error::Solve {
        runs: runs.len(),
        last: match runs.last().map(|r| &r.status) {
            Some(RunStatus::Failed(reason)) => reason.clone(),
            _ => String::new(),
        },
    })?;
    Ok(SolveResult {
        x0: x0.to_vec(),
        estimate,
        runs,
        tail: config.tail,
        on_boundary,
        seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
    })
}
