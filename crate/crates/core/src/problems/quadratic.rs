use std::f64::consts::SQRT_2;

use crate::error::Result;
use crate::problem::{norm_sq, Domain, Problem};

/// `Δu + |∇u|^2 = 2 e^{-u}` on the ball `|x| < r` with boundary value
/// `log((r^2 + 1)/d)`; the exact solution is `u(x) = log((|x|^2 + 1)/d)`.
///
/// Paths still inside at the horizon are assigned the exact solution at
/// their final state.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticGradient {
    dim: usize,
    radius: f64,
    domain: Domain,
}

impl QuadraticGradient {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        super::check_dim(dim)?;
        super::check_positive("radius r", radius)?;
        Ok(Self { dim, radius, domain: Domain::Ball { radius } })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn exact(&self, x2: f64) -> f64 {
        ((x2 + 1.0) / self.dim as f64).ln()
    }
}

impl Problem for QuadraticGradient {
    fn name(&self) -> &str {
        "quadratic"
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

    fn generator(&self, _x: &[f64], y: f64, zeta: &[f64]) -> f64 {
        norm_sq(zeta) - 2.0 * (-y).exp()
    }

    fn generator_partials(&self, _x: &[f64], y: f64, zeta: &[f64], dzeta: &mut [f64]) -> (f64, f64) {
        for (g, z) in dzeta.iter_mut().zip(zeta) {
            *g = 2.0 * z;
        }
        let e = (-y).exp();
        (norm_sq(zeta) - 2.0 * e, 2.0 * e)
    }

    fn terminal_value(&self, _x: &[f64]) -> f64 {
        self.exact(self.radius * self.radius)
    }

    fn cutoff_value(&self, x: &[f64]) -> f64 {
        self.exact(norm_sq(x))
    }

    fn reference(&self, x: &[f64]) -> Option<f64> {
        let r2 = self.radius * self.radius;
        Some(self.exact(norm_sq(x).min(r2)))
    }

    fn initial_value_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_at_origin_of_state_space() {
        let p = QuadraticGradient::new(2, 1.0).unwrap();
        assert_eq!(p.generator(&[0.0, 0.0], 0.0, &[0.0, 0.0]), -2.0);
    }

    #[test]
    fn boundary_and_reference_values() {
        let p = QuadraticGradient::new(2, 1.0).unwrap();
        assert_eq!(p.terminal_value(&[1.0, 0.0]), 0.0);
        let q = QuadraticGradient::new(100, 1.0).unwrap();
        let u0 = q.reference(&vec![0.0; 100]).unwrap();
        assert!((u0 - 0.01f64.ln()).abs() < 1e-15);
        assert!((u0 + 4.6052).abs() < 1e-4);
    }

    #[test]
    fn partials_match_the_generator() {
        let p = QuadraticGradient::new(3, 1.0).unwrap();
        let x = [0.1, 0.2, 0.3];
        let zeta = [0.4, -0.5, 0.6];
        let y = -0.7;
        let mut dz = [0.0; 3];
        let (f, fy) = p.generator_partials(&x, y, &zeta, &mut dz);
        assert_eq!(f, p.generator(&x, y, &zeta));
        let h = 1e-6;
        let fd_y = (p.generator(&x, y + h, &zeta) - p.generator(&x, y - h, &zeta)) / (2.0 * h);
        assert!((fd_y - fy).abs() < 1e-8);
        for k in 0..3 {
            let (mut zp, mut zm) = (zeta, zeta);
            zp[k] += h;
            zm[k] -= h;
            let fd = (p.generator(&x, y, &zp) - p.generator(&x, y, &zm)) / (2.0 * h);
            assert!((fd - dz[k]).abs() < 1e-8);
        }
    }
}
