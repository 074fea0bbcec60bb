use crate::error::Result;
use crate::grid::TimeGrid;
use crate::problem::Problem;
use crate::sde::PathBatch;

use super::rollout::{loss, rollout, rollout_recorded, Tape};
use super::state::SolverState;

/// Outcome of [`gradient_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    pub parameters: usize,
    pub max_relative_error: f64,
    /// Group index (`0` = u0, `1` = z0, `2 + k` = subnet `k`) and offset of
    /// the worst parameter.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares the recorded gradient of the loss on `batch` with central
/// differences of step `step` for every parameter of `state`.
///
/// The relative error of one parameter is `|a - n| / max(|a|, |n|)`; pairs
/// that agree to within `abs_floor` count as exact.
pub fn gradient_check(
    batch: &PathBatch,
    state: &SolverState,
    problem: &dyn Problem,
    grid: &TimeGrid,
    step: f64,
    abs_floor: f64,
) -> Result<GradientCheck> {
    let mut tape = Tape::default();
    rollout_recorded(batch, state, problem, grid, &mut tape)?;
    let grads = tape.gradients(batch, grid, state, batch.terminal_xi())?;
    let analytic: Vec<Vec<f64>> = grads.groups().iter().map(|g| g.to_vec()).collect();

    let eval = |s: &SolverState| -> Result<f64> { loss(&rollout(batch, s, problem, grid)?, batch.terminal_xi()) };
    let mut probe = state.clone();
    let mut report = GradientCheck { parameters: 0, max_relative_error: 0.0, worst: (0, 0), analytic: 0.0, numeric: 0.0 };
    for (g, group) in analytic.iter().enumerate() {
        for (i, &a) in group.iter().enumerate() {
            let original = probe.groups_mut()[g][i];
            probe.groups_mut()[g][i] = original + step;
            let plus = eval(&probe)?;
            probe.groups_mut()[g][i] = original - step;
            let minus = eval(&probe)?;
            probe.groups_mut()[g][i] = original;
            let n = (plus - minus) / (2.0 * step);
            let diff = (a - n).abs();
            let rel = if diff <= abs_floor { 0.0 } else { diff / a.abs().max(n.abs()) };
            report.parameters += 1;
            if rel > report.max_relative_error || report.parameters == 1 {
                report = GradientCheck { max_relative_error: rel, worst: (g, i), analytic: a, numeric: n, ..report };
            }
        }
    }
    Ok(report)
}
