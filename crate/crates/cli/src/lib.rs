//! Batch front end for the `elliptic-bsde` solver: configuration files,
//! concurrent solve jobs over evaluation points, and CSV output.
//!
//! # Output layout
//!
//! ```text
//! OUT/config.toml              resolved configuration, re-readable with --config
//! OUT/summary.csv              one row per point
//! OUT/traces/point_NNN.csv     run, epoch, train_loss, val_loss, u0
//! OUT/plot/solution.csv        x, estimate, reference
//! OUT/plot/loss_NNN.csv        epoch, train_loss, val_loss (mean over runs)
//! OUT/timing.csv               points, concurrency, total_seconds, seconds_per_eight_points
//! OUT/intensity.csv            dividend problem only: the intensity matrix
//! ```
//!
//! `summary.csv` has the columns `point, coordinate, estimate, reference,
//! abs_error, seconds, seed, runs_ok, runs_failed, status, message, x_1 ..
//! x_d`. `status` is `ok`, `ok-boundary` (the point lies outside the open
//! domain and the boundary value is returned) or `failed`. In deterministic
//! mode the `seconds` column is empty and `timing.csv` is not written, so two
//! runs of the same configuration give identical files.

pub mod config;
pub mod jobs;
pub mod plot;

pub use config::{emit_config, parse_config, ConfigError, PointSpec, ProblemConfig, ProblemKind, RunConfig};
pub use jobs::{run_jobs, write_outputs, RunError, Summary, SummaryRow};
pub use plot::emit_plot_data;
