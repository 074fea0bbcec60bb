#![allow(dead_code)]

use elliptic_bsde::{Domain, Problem};

/// No drift, no noise, zero generator on the unit ball.
pub struct Still {
    pub dim: usize,
    pub domain: Domain,
}

impl Still {
    pub fn new(dim: usize) -> Self {
        Self { dim, domain: Domain::Ball { radius: 1.0 } }
    }
}

impl Problem for Still {
    fn name(&self) -> &str {
        "still"
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
    }
    fn generator(&self, _x: &[f64], _y: f64, _zeta: &[f64]) -> f64 {
        0.0
    }
    fn generator_partials(&self, _x: &[f64], _y: f64, _zeta: &[f64], dzeta: &mut [f64]) -> (f64, f64) {
        dzeta.fill(0.0);
        (0.0, 0.0)
    }
    fn terminal_value(&self, x: &[f64]) -> f64 {
        x.iter().sum()
    }
    fn cutoff_value(&self, x: &[f64]) -> f64 {
        x.iter().sum::<f64>() + 10.0
    }
    fn initial_value_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

/// Standard Brownian motion on all of `R^d` with generator `f = -delta * y`.
pub struct Free {
    pub dim: usize,
    pub delta: f64,
    pub domain: Domain,
}

impl Free {
    pub fn new(dim: usize, delta: f64) -> Self {
        Self { dim, delta, domain: Domain::Unbounded }
    }
}

impl Problem for Free {
    fn name(&self) -> &str {
        "free"
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
            out[i * self.dim + i] = 1.0;
        }
    }
    fn generator(&self, _x: &[f64], y: f64, _zeta: &[f64]) -> f64 {
        -self.delta * y
    }
    fn generator_partials(&self, _x: &[f64], y: f64, _zeta: &[f64], dzeta: &mut [f64]) -> (f64, f64) {
        dzeta.fill(0.0);
        (-self.delta * y, -self.delta)
    }
    fn terminal_value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn cutoff_value(&self, x: &[f64]) -> f64 {
        x[0]
    }
    fn initial_value_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

/// Point `(v, ..., v)` with `|x| = norm`.
pub fn diagonal(dim: usize, norm: f64) -> Vec<f64> {
    vec![norm / (dim as f64).sqrt(); dim]
}
