//! Forward rollout of the discretized backward equation
//!
//! ```text
//! Y_0 = u0,
//! Y_{n+1} = Y_n - 1{t_n < tau} f(X_n, Y_n, zeta_n) dt_n + 1{t_n < tau} zeta_n sigma(X_n) dW_n,
//! ```
//!
//! with `zeta_0 = z0` and `zeta_n = subnet_n(X_n)`, and its reverse-mode
//! differentiation. Only paths that have not exited take part in a step, so
//! each step runs its network on the compacted batch of active paths.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::neural::ForwardCache;
use crate::problem::Problem;
use crate::sde::PathBatch;

use super::state::SolverState;

#[derive(Clone, Debug, Default)]
struct StepRecord {
    active: Vec<usize>,
    cache: ForwardCache,
    zeta: Vec<f64>,
    /// `df/dy` per active path.
    fy: Vec<f64>,
    /// `df/dzeta` per active path, `rows x d`.
    fz: Vec<f64>,
}

/// Everything the backward pass needs from a recorded rollout.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    steps: Vec<StepRecord>,
    recorded_steps: usize,
    paths: usize,
    dim: usize,
    terminal: Vec<f64>,
    subnet_count: usize,
}

/// `d loss / d parameter` for every trainable quantity of a [`SolverState`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub u0: f64,
    pub z0: Vec<f64>,
    subnets: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn subnet(&self, k: usize) -> Result<&[f64]> {
        self.subnets.get(k).map(|v| v.as_slice()).ok_or_else(|| {
            Error::Contract(format!("subnetwork {k} is not on the tape ({} recorded)", self.subnets.len()))
        })
    }

    pub fn subnet_count(&self) -> usize {
        self.subnets.len()
    }

    /// Groups in the order of [`SolverState::groups_mut`].
    pub fn groups(&self) -> Vec<&[f64]> {
        let mut g: Vec<&[f64]> = vec![std::slice::from_ref(&self.u0), &self.z0];
        g.extend(self.subnets.iter().map(|v| v.as_slice()));
        g
    }

    /// Zeroes everything except the `u0` component.
    pub fn keep_only_value(&mut self) {
        self.z0.iter_mut().for_each(|v| *v = 0.0);
        for s in &mut self.subnets {
            s.fill(0.0);
        }
    }
}

/// Mean squared terminal mismatch `(1/M) sum (Y_j - xi_j)^2`.
pub fn loss(terminal: &[f64], xi: &[f64]) -> Result<f64> {
    if terminal.is_empty() {
        return Err(Error::arg("loss of an empty batch"));
    }
    if terminal.len() != xi.len() {
        return Err(Error::arg(format!(
            "terminal values ({}) and targets ({}) differ in length",
            terminal.len(),
            xi.len()
        )));
    }
    let sum: f64 = terminal.iter().zip(xi).map(|(y, x)| (y - x) * (y - x)).sum();
    Ok(sum / terminal.len() as f64)
}

/// Per-path `Y_{tau ∧ T}` without recording.
pub fn rollout(batch: &PathBatch, state: &SolverState, problem: &dyn Problem, grid: &TimeGrid) -> Result<Vec<f64>> {
    let mut cache = ForwardCache::default();
    run(batch, state, problem, grid, Recording::Off(&mut cache))
}

/// Per-path `Y_{tau ∧ T}`, recording what [`Tape::gradients`] needs.
pub fn rollout_recorded<'t>(
    batch: &PathBatch,
    state: &SolverState,
    problem: &dyn Problem,
    grid: &TimeGrid,
    tape: &'t mut Tape,
) -> Result<&'t [f64]> {
    let terminal = run(batch, state, problem, grid, Recording::On(tape))?;
    tape.terminal = terminal;
    Ok(&tape.terminal)
}

enum Recording<'a> {
    Off(&'a mut ForwardCache),
    On(&'a mut Tape),
}

fn check_shapes(batch: &PathBatch, state: &SolverState, problem: &dyn Problem, grid: &TimeGrid) -> Result<()> {
    let d = problem.dim();
    if batch.dim() != d || state.z0.len() != d {
        return Err(Error::arg("batch, state and problem dimensions disagree"));
    }
    if batch.steps() != grid.steps() {
        return Err(Error::arg("batch was simulated on a different grid"));
    }
    let expected = match (grid.steps(), state.is_shared()) {
        (0 | 1, _) => 0,
        (_, true) => 1,
        (n, false) => n - 1,
    };
    if state.subnets().len() != expected {
        return Err(Error::arg(format!(
            "state holds {} subnetworks, grid needs {expected}",
            state.subnets().len()
        )));
    }
    Ok(())
}

fn run(
    batch: &PathBatch,
    state: &SolverState,
    problem: &dyn Problem,
    grid: &TimeGrid,
    mut recording: Recording<'_>,
) -> Result<Vec<f64>> {
    check_shapes(batch, state, problem, grid)?;
    let d = problem.dim();
    let m = batch.paths();
    let steps = grid.steps();
    let mut y = vec![state.u0; m];
    let mut active: Vec<usize> = (0..m).filter(|&j| batch.is_active(j, 0)).collect();
    let mut inputs = Vec::new();
    let mut scratch_zeta = Vec::new();
    let mut scratch_fy = Vec::new();
    let mut scratch_fz = Vec::new();

    if let Recording::On(tape) = &mut recording {
        tape.steps.resize_with(steps, StepRecord::default);
        tape.recorded_steps = 0;
        tape.paths = m;
        tape.dim = d;
        tape.subnet_count = state.subnets().len();
    }

    for n in 0..steps {
        if n > 0 {
            active.retain(|&j| batch.is_active(j, n));
        }
        if active.is_empty() {
            break;
        }
        let rows = active.len();
        let h = grid.dt(n);

        let (record, cache, zeta, fy, fz) = match &mut recording {
            Recording::On(tape) => {
                tape.recorded_steps = n + 1;
                let rec = &mut tape.steps[n];
                rec.active.clone_from(&active);
                (true, &mut rec.cache, &mut rec.zeta, &mut rec.fy, &mut rec.fz)
            }
            Recording::Off(cache) => (false, &mut **cache, &mut scratch_zeta, &mut scratch_fy, &mut scratch_fz),
        };

        zeta.resize(rows * d, 0.0);
        if n == 0 {
            for row in zeta.chunks_exact_mut(d) {
                row.copy_from_slice(&state.z0);
            }
        } else if state.is_frozen() {
            zeta.fill(0.0);
        } else {
            inputs.clear();
            for &j in &active {
                inputs.extend_from_slice(batch.state(j, n));
            }
            let net = &state.subnets()[state.subnet_index(n)];
            net.forward_recorded(&inputs, rows, cache);
            zeta.copy_from_slice(cache.output());
        }

        if record {
            fy.resize(rows, 0.0);
            fz.resize(rows * d, 0.0);
        }
        for (r, &j) in active.iter().enumerate() {
            let x = batch.state(j, n);
            let z = &zeta[r * d..(r + 1) * d];
            let f = if record {
                let (f, dfy) = problem.generator_partials(x, y[j], z, &mut fz[r * d..(r + 1) * d]);
                fy[r] = dfy;
                f
            } else {
                problem.generator(x, y[j], z)
            };
            let martingale: f64 = z.iter().zip(batch.noise(j, n)).map(|(a, b)| a * b).sum();
            let next = y[j] - f * h + martingale;
            if !next.is_finite() {
                return Err(Error::Training {
                    epoch: 0,
                    reason: format!("non-finite Y on path {j} at step {}", n + 1),
                });
            }
            y[j] = next;
        }
    }
    Ok(y)
}

impl Tape {
    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }

    /// Reverse pass for the loss `(1/M) sum (Y_j - xi_j)^2` of the recorded
    /// rollout. `batch` and `state` must be the ones that were recorded.
    pub fn gradients(&self, batch: &PathBatch, grid: &TimeGrid, state: &SolverState, xi: &[f64]) -> Result<Gradients> {
        if self.paths == 0 || self.terminal.len() != self.paths {
            return Err(Error::Contract("no rollout has been recorded on this tape".into()));
        }
        if batch.paths() != self.paths || xi.len() != self.paths || batch.dim() != self.dim {
            return Err(Error::Contract("batch does not match the recorded rollout".into()));
        }
        if state.subnets().len() != self.subnet_count || state.z0.len() != self.dim {
            return Err(Error::Contract("state does not match the recorded rollout".into()));
        }
        let d = self.dim;
        let scale = 2.0 / self.paths as f64;
        let mut ybar: Vec<f64> = self.terminal.iter().zip(xi).map(|(y, x)| scale * (y - x)).collect();
        let mut grads = Gradients {
            u0: 0.0,
            z0: vec![0.0; d],
            subnets: state.subnets().iter().map(|n| vec![0.0; n.params().len()]).collect(),
        };
        let mut zbar = Vec::new();
        let mut scratch = Vec::new();

        for n in (0..self.recorded_steps).rev() {
            let rec = &self.steps[n];
            let h = grid.dt(n);
            zbar.clear();
            zbar.resize(rec.active.len() * d, 0.0);
            for (r, &j) in rec.active.iter().enumerate() {
                let noise = batch.noise(j, n);
                let fz = &rec.fz[r * d..(r + 1) * d];
                let yb = ybar[j];
                for k in 0..d {
                    zbar[r * d + k] = yb * (noise[k] - fz[k] * h);
                }
                ybar[j] = yb * (1.0 - rec.fy[r] * h);
            }
            if n == 0 {
                for row in zbar.chunks_exact(d) {
                    for (g, v) in grads.z0.iter_mut().zip(row) {
                        *g += v;
                    }
                }
            } else if !state.is_frozen() {
                let k = state.subnet_index(n);
                state.subnets()[k].backward(&rec.cache, &zbar, &mut grads.subnets[k], &mut scratch);
            }
        }
        grads.u0 = ybar.iter().sum();
        if state.is_frozen() {
            grads.keep_only_value();
        }
        Ok(grads)
    }
}
