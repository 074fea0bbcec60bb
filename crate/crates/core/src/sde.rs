//! Euler–Maruyama simulation of the forward diffusion up to its first exit
//! from the domain.
//!
//! Every path draws from its own random stream `(seed, path index)`. A path
//! that leaves the domain at grid time `t_k` is frozen there: all later
//! states equal the exit state and all later increments are zero.
//!
//! Two exit rules are available. [`ExitRule::Discrete`] only checks the grid
//! points. [`ExitRule::Bridge`] additionally flags a crossing between two
//! inside grid points with the Brownian-bridge probability
//! `exp(-2 a b / (s^2 h))` (`a`, `b` the distances to the face, `s^2` the
//! normal diffusion rate) and moves the exit step onto the boundary by
//! shifting its Brownian increment along `sigma^T n`, so the recorded
//! increment still reproduces the recorded exit state.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::problem::Problem;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExitRule {
    /// Exit is detected at grid points only.
    Discrete,
    /// Grid-point detection plus a Brownian-bridge crossing test, with the
    /// exit step snapped onto the boundary.
    #[default]
    Bridge,
}

impl std::str::FromStr for ExitRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(ExitRule::Discrete),
            "bridge" => Ok(ExitRule::Bridge),
            other => Err(Error::arg(format!("unknown exit rule {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimulationOptions {
    pub exit_rule: ExitRule,
    /// Worker threads; 1 simulates sequentially. Results do not depend on it.
    pub threads: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { exit_rule: ExitRule::Bridge, threads: 1 }
    }
}

/// `M` simulated trajectories of the forward process on one time grid.
///
/// Storage is path-major: `states` is `M x (N+1) x d`, `increments` and
/// `noise` (the products `sigma(X_n) dW_n`) are `M x N x d`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathBatch {
    dim: usize,
    steps: usize,
    paths: usize,
    states: Vec<f64>,
    increments: Vec<f64>,
    noise: Vec<f64>,
    exit_index: Vec<usize>,
    terminal_xi: Vec<f64>,
    seed: u64,
}

impl PathBatch {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Marker stored in `exit_index` for paths that did not exit by `T`.
    pub fn never_exited(&self) -> usize {
        self.steps + 1
    }

    #[inline]
    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let at = (path * (self.steps + 1) + step) * self.dim;
        &self.states[at..at + self.dim]
    }

    #[inline]
    pub fn increment(&self, path: usize, step: usize) -> &[f64] {
        let at = (path * self.steps + step) * self.dim;
        &self.increments[at..at + self.dim]
    }

    /// `sigma(X_n) dW_n` for the given path and step.
    #[inline]
    pub fn noise(&self, path: usize, step: usize) -> &[f64] {
        let at = (path * self.steps + step) * self.dim;
        &self.noise[at..at + self.dim]
    }

    /// First grid index at which the path is outside the domain, or
    /// [`never_exited`](Self::never_exited).
    #[inline]
    pub fn exit_index(&self, path: usize) -> usize {
        self.exit_index[path]
    }

    pub fn exit_indices(&self) -> &[usize] {
        &self.exit_index
    }

    /// Whether step `n -> n+1` of the path lies before its exit.
    #[inline]
    pub fn is_active(&self, path: usize, step: usize) -> bool {
        step < self.exit_index[path]
    }

    /// `t_{exit index}`, i.e. the discretized `tau ∧ T`.
    pub fn stopped_time(&self, path: usize, grid: &TimeGrid) -> f64 {
        grid.time(self.exit_index[path].min(self.steps))
    }

    pub fn terminal_xi(&self) -> &[f64] {
        &self.terminal_xi
    }

    /// Writes `path,step,time,x_1..x_d,exited` rows.
    pub fn write_csv<W: Write>(&self, grid: &TimeGrid, mut out: W) -> io::Result<()> {
        write!(out, "path,step,time")?;
        for k in 1..=self.dim {
            write!(out, ",x_{k}")?;
        }
        writeln!(out, ",exited")?;
        for j in 0..self.paths {
            for n in 0..=self.steps {
                write!(out, "{j},{n},{:?}", grid.time(n))?;
                for v in self.state(j, n) {
                    write!(out, ",{v:?}")?;
                }
                writeln!(out, ",{}", u8::from(n >= self.exit_index[j]))?;
            }
        }
        Ok(())
    }

    fn reset(&mut self, dim: usize, steps: usize, paths: usize, seed: u64) {
        self.dim = dim;
        self.steps = steps;
        self.paths = paths;
        self.seed = seed;
        self.states.resize(paths * (steps + 1) * dim, 0.0);
        self.increments.resize(paths * steps * dim, 0.0);
        self.noise.resize(paths * steps * dim, 0.0);
        self.exit_index.resize(paths, 0);
        self.terminal_xi.resize(paths, 0.0);
    }
}

/// Simulates `paths` trajectories started at `x0`.
pub fn simulate_paths(
    problem: &dyn Problem,
    x0: &[f64],
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    options: SimulationOptions,
) -> Result<PathBatch> {
    let mut batch = PathBatch::default();
    simulate_into(&mut batch, problem, x0, grid, paths, seed, options)?;
    Ok(batch)
}

/// Like [`simulate_paths`], reusing the allocations of `batch`.
pub fn simulate_into(
    batch: &mut PathBatch,
    problem: &dyn Problem,
    x0: &[f64],
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    options: SimulationOptions,
) -> Result<()> {
    check_inputs(problem, x0, paths)?;
    let d = problem.dim();
    let steps = grid.steps();
    batch.reset(d, steps, paths, seed);

    let state_stride = (steps + 1) * d;
    let step_stride = steps * d;
    let threads = options.threads.clamp(1, paths);
    let per_thread = paths.div_ceil(threads);

    let PathBatch { states, increments, noise, exit_index, terminal_xi, .. } = batch;
    let work = states
        .chunks_mut(per_thread * state_stride)
        .zip(increments.chunks_mut(per_thread * step_stride))
        .zip(noise.chunks_mut(per_thread * step_stride))
        .zip(exit_index.chunks_mut(per_thread))
        .zip(terminal_xi.chunks_mut(per_thread))
        .enumerate();

    let run_chunk = |chunk: usize, st: &mut [f64], inc: &mut [f64], nz: &mut [f64], ex: &mut [usize], xi: &mut [f64]| {
        let mut walker = Walker::new(problem, grid, options.exit_rule);
        for local in 0..ex.len() {
            let path = chunk * per_thread + local;
            let (k, v) = walker.run(
                x0,
                seed,
                path,
                &mut st[local * state_stride..(local + 1) * state_stride],
                &mut inc[local * step_stride..(local + 1) * step_stride],
                &mut nz[local * step_stride..(local + 1) * step_stride],
            )?;
            ex[local] = k;
            xi[local] = v;
        }
        Ok::<(), Error>(())
    };

    if threads == 1 {
        for (chunk, ((((st, inc), nz), ex), xi)) in work {
            run_chunk(chunk, st, inc, nz, ex, xi)?;
        }
        return Ok(());
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = work
            .map(|(chunk, ((((st, inc), nz), ex), xi))| scope.spawn(move || run_chunk(chunk, st, inc, nz, ex, xi)))
            .collect();
        // Report the failure of the lowest path index, independent of timing.
        let mut first_err = None;
        for h in handles {
            if let Err(e) = h.join().expect("path simulation thread panicked") {
                first_err.get_or_insert(e);
            }
        }
        first_err.map_or(Ok(()), Err)
    })
}

fn check_inputs(problem: &dyn Problem, x0: &[f64], paths: usize) -> Result<()> {
    let d = problem.dim();
    if x0.len() != d {
        return Err(Error::arg(format!("start point has length {}, problem dimension is {d}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("start point must be finite"));
    }
    if paths == 0 {
        return Err(Error::arg("number of paths M must be at least 1"));
    }
    Ok(())
}

/// Where and when one path stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct PathExit {
    /// As [`PathBatch::exit_index`].
    pub exit_index: usize,
    /// State at `min(exit_index, N)`.
    pub exit_state: Vec<f64>,
    pub terminal_xi: f64,
}

impl PathExit {
    /// `t_{exit_index}`, or `T` for a path that never exited.
    pub fn stopped_time(&self, grid: &TimeGrid) -> f64 {
        grid.time(self.exit_index.min(grid.steps()))
    }
}

/// Simulates the same paths as [`simulate_paths`] but keeps only their
/// exit data, so memory does not grow with `paths * N`.
pub fn simulate_exits(
    problem: &dyn Problem,
    x0: &[f64],
    grid: &TimeGrid,
    paths: usize,
    seed: u64,
    options: SimulationOptions,
) -> Result<Vec<PathExit>> {
    check_inputs(problem, x0, paths)?;
    let d = problem.dim();
    let steps = grid.steps();
    let threads = options.threads.clamp(1, paths);
    let per_thread = paths.div_ceil(threads);
    let mut exits = vec![PathExit { exit_index: 0, exit_state: Vec::new(), terminal_xi: 0.0 }; paths];

    let run_chunk = |chunk: usize, out: &mut [PathExit]| {
        let mut walker = Walker::new(problem, grid, options.exit_rule);
        let mut st = vec![0.0; (steps + 1) * d];
        let mut inc = vec![0.0; steps * d];
        let mut nz = vec![0.0; steps * d];
        for (local, e) in out.iter_mut().enumerate() {
            let (k, xi) = walker.run(x0, seed, chunk * per_thread + local, &mut st, &mut inc, &mut nz)?;
            let at = k.min(steps) * d;
            *e = PathExit { exit_index: k, exit_state: st[at..at + d].to_vec(), terminal_xi: xi };
        }
        Ok::<(), Error>(())
    };

    if threads == 1 {
        run_chunk(0, &mut exits)?;
        return Ok(exits);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = exits
            .chunks_mut(per_thread)
            .enumerate()
            .map(|(chunk, out)| scope.spawn(move || run_chunk(chunk, out)))
            .collect();
        let mut first_err = None;
        for h in handles {
            if let Err(e) = h.join().expect("path simulation thread panicked") {
                first_err.get_or_insert(e);
            }
        }
        first_err.map_or(Ok(()), Err)
    })?;
    Ok(exits)
}

/// Scratch space for simulating one path at a time.
struct Walker<'a> {
    problem: &'a dyn Problem,
    grid: &'a TimeGrid,
    rule: ExitRule,
    drift: Vec<f64>,
    dw: Vec<f64>,
    sdw: Vec<f64>,
    next: Vec<f64>,
    normal: Vec<f64>,
    sigma: Vec<f64>,
    sigma_t_n: Vec<f64>,
    direction: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn new(problem: &'a dyn Problem, grid: &'a TimeGrid, rule: ExitRule) -> Self {
        let d = problem.dim();
        Self {
            problem,
            grid,
            rule,
            drift: vec![0.0; d],
            dw: vec![0.0; d],
            sdw: vec![0.0; d],
            next: vec![0.0; d],
            normal: vec![0.0; d],
            sigma: vec![0.0; d * d],
            sigma_t_n: vec![0.0; d],
            direction: vec![0.0; d],
        }
    }

    /// Returns `(exit index, terminal value)`.
    fn run(
        &mut self,
        x0: &[f64],
        seed: u64,
        path: usize,
        states: &mut [f64],
        increments: &mut [f64],
        noise: &mut [f64],
    ) -> Result<(usize, f64)> {
        let problem = self.problem;
        let domain = problem.domain();
        let d = x0.len();
        let steps = self.grid.steps();
        states[..d].copy_from_slice(x0);

        if !domain.contains(x0) {
            for n in 1..=steps {
                states[n * d..(n + 1) * d].copy_from_slice(x0);
            }
            increments.fill(0.0);
            noise.fill(0.0);
            return Ok((0, problem.terminal_value(x0)));
        }

        let mut rng = Stream::with_stream(seed, path as u64);
        for n in 0..steps {
            let h = self.grid.dt(n);
            let sqrt_h = h.sqrt();
            let x = &states[n * d..(n + 1) * d];
            for w in self.dw.iter_mut() {
                *w = sqrt_h * rng.normal();
            }
            problem.drift(x, &mut self.drift);
            problem.apply_diffusion(x, &self.dw, &mut self.sdw);
            for (((nx, &xk), &mu), &sw) in self.next.iter_mut().zip(x).zip(&self.drift).zip(&self.sdw) {
                *nx = xk + mu * h + sw;
            }
            problem.project_state(&mut self.next);
            if self.next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulation { path, step: n + 1 });
            }

            let mut exit_face = domain.face_beyond(&self.next);
            if self.rule == ExitRule::Bridge {
                let u = rng.uniform();
                if exit_face.is_none() {
                    exit_face = self.bridge_crossing(x, h, u);
                }
                if let Some(face) = exit_face {
                    if !self.snap_exit(x, face) && domain.contains(&self.next) {
                        // No way to place the exit on the face; keep walking.
                        exit_face = None;
                    }
                }
            }

            states[(n + 1) * d..(n + 2) * d].copy_from_slice(&self.next);
            increments[n * d..(n + 1) * d].copy_from_slice(&self.dw);
            noise[n * d..(n + 1) * d].copy_from_slice(&self.sdw);

            if exit_face.is_some() {
                let k = n + 1;
                for m in k + 1..=steps {
                    states.copy_within(k * d..(k + 1) * d, m * d);
                }
                increments[k * d..].fill(0.0);
                noise[k * d..].fill(0.0);
                return Ok((k, problem.terminal_value(&self.next)));
            }
        }
        Ok((steps + 1, problem.cutoff_value(&states[steps * d..])))
    }

    fn bridge_crossing(&mut self, x: &[f64], h: f64, u: f64) -> Option<usize> {
        let domain = self.problem.domain();
        let mut cumulative = 0.0;
        for face in 0..domain.face_count() {
            let a = domain.face_distance(face, x);
            let b = domain.face_distance(face, &self.next);
            domain.face_normal(face, x, &mut self.normal);
            let rate = self.problem.normal_variance(x, &self.normal);
            if rate <= 0.0 {
                continue;
            }
            let exponent = 2.0 * a * b / (rate * h);
            if exponent < 50.0 {
                cumulative += (-exponent).exp();
                if u < cumulative {
                    return Some(face);
                }
            }
        }
        None
    }

    /// Moves the exit step onto `face` by shifting `dW` along `sigma^T n`.
    fn snap_exit(&mut self, x: &[f64], face: usize) -> bool {
        let problem = self.problem;
        let d = x.len();
        problem.domain().face_normal(face, &self.next, &mut self.normal);
        problem.diffusion(x, &mut self.sigma);
        for k in 0..d {
            self.sigma_t_n[k] = (0..d).map(|i| self.sigma[i * d + k] * self.normal[i]).sum();
        }
        for i in 0..d {
            self.direction[i] = (0..d).map(|k| self.sigma[i * d + k] * self.sigma_t_n[k]).sum();
        }
        match problem.domain().snap_to_face(face, &mut self.next, &self.direction) {
            Some(c) => {
                for k in 0..d {
                    self.dw[k] -= c * self.sigma_t_n[k];
                    self.sdw[k] -= c * self.direction[k];
                }
                problem.project_state(&mut self.next);
                true
            }
            None => false,
        }
    }
}
