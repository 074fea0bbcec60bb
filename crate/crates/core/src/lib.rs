//! Deep BSDE solver for semilinear (degenerate) elliptic PDEs.
//!
//! A PDE `L u + f(x, u, ∇u) = 0` on a domain `G` with Dirichlet data `g` is
//! solved pointwise: the forward diffusion generated by `L` is simulated from
//! `x` until it leaves `G` (or the horizon `T` is reached), the backward
//! equation is rolled forward along those paths with `∇u` represented by one
//! small network per time step, and `u(x)` is the trainable starting value
//! that best matches the boundary data at the exit times.
//!
//! ```no_run
//! use elliptic_bsde::problems::Poisson;
//! use elliptic_bsde::solver::{estimate_point, TrainConfig};
//!
//! let problem = Poisson::new(2, 0.5, 0.75).unwrap();
//! let result = estimate_point(&problem, &[0.0, 0.0], &TrainConfig::default(), 42).unwrap();
//! println!("u(0) ≈ {}", result.estimate);
//! ```

pub mod error;
pub mod grid;
pub mod neural;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod sde;
pub mod solver;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use problem::{Domain, Problem};
pub use sde::{simulate_exits, simulate_paths, ExitRule, PathBatch, PathExit, SimulationOptions};
