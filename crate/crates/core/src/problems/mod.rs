//! The three benchmark problems: a Poisson equation on a ball, a PDE with a
//! quadratic gradient term on a ball, and the dividend maximization HJB
//! equation of an insurer with a hidden Markov-modulated trend.

mod dividend;
mod poisson;
mod quadratic;

pub use dividend::{intensity_matrix, write_intensity_csv, Dividend, DividendParams};
pub use poisson::Poisson;
pub use quadratic::QuadraticGradient;

use crate::error::{Error, Result};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::arg("dimension must be at least 1"))
    } else {
        Ok(())
    }
}
