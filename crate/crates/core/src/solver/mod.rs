//! Training of the value `u(x)` by forward rollout of the discretized BSDE.

mod check;
mod rollout;
mod state;
mod train;

pub use check::{gradient_check, GradientCheck};
pub use rollout::{loss, rollout, rollout_recorded, Gradients, Tape};
pub use state::SolverState;
pub use train::{
    estimate_point, tail_mean, train_single_run, LrSchedule, RunHistory, RunRecord, RunStatus, SolveResult,
    TrainConfig, TrainedRun,
};
