use std::f64::consts::SQRT_2;

use crate::error::Result;
use crate::problem::{norm_sq, Domain, Problem};

/// `Δu = -b` on the ball `|x| < r`, `u = 0` on the sphere.
///
/// Forward process `dX = sqrt(2) dW`, generator `f ≡ b`, terminal value 0.
/// Paths still inside at the horizon also receive 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Poisson {
    dim: usize,
    radius: f64,
    source: f64,
    domain: Domain,
}

impl Poisson {
    pub fn new(dim: usize, radius: f64, source: f64) -> Result<Self> {
        super::check_dim(dim)?;
        super::check_positive("radius r", radius)?;
        if !source.is_finite() {
            return Err(crate::Error::arg("source b must be finite"));
        }
        Ok(Self { dim, radius, source, domain: Domain::Ball { radius } })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn source(&self) -> f64 {
        self.source
    }
}

impl Problem for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = SQRT_2;
        }
    }

    fn apply_diffusion(&self, _x: &[f64], dw: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(dw) {
            *o = SQRT_2 * w;
        }
    }

    fn normal_variance(&self, _x: &[f64], normal: &[f64]) -> f64 {
        2.0 * norm_sq(normal)
    }

    fn generator(&self, _x: &[f64], _y: f64, _zeta: &[f64]) -> f64 {
        self.source
    }

    fn generator_partials(&self, _x: &[f64], _y: f64, _zeta: &[f64], dzeta: &mut [f64]) -> (f64, f64) {
        dzeta.fill(0.0);
        (self.source, 0.0)
    }

    fn terminal_value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn cutoff_value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn reference(&self, x: &[f64]) -> Option<f64> {
        let r2 = self.radius * self.radius;
        let x2 = norm_sq(x);
        if x2 >= r2 {
            return Some(0.0);
        }
        Some(self.source * (r2 - x2) / (2.0 * self.dim as f64))
    }

    fn initial_value_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}
