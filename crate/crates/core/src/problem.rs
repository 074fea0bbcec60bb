//! The description of one elliptic PDE / BSDE instance.

use serde::{Deserialize, Serialize};

/// The open set `G` on which the PDE is posed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    /// `{ |x| < radius }`.
    Ball { radius: f64 },
    /// `{ lower < x[axis] < upper }`, unrestricted in every other coordinate.
    Slab { axis: usize, lower: f64, upper: f64 },
    /// All of `R^d`; paths never exit.
    Unbounded,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Domain::Ball { radius } => norm_sq(x) < radius * radius,
            Domain::Slab { axis, lower, upper } => x[axis] > lower && x[axis] < upper,
            Domain::Unbounded => true,
        }
    }

    /// Number of boundary faces handled separately by the crossing test.
    pub fn face_count(&self) -> usize {
        match self {
            Domain::Ball { .. } => 1,
            Domain::Slab { .. } => 2,
            Domain::Unbounded => 0,
        }
    }

    /// Distance from `x` to `face`, positive inside.
    pub fn face_distance(&self, face: usize, x: &[f64]) -> f64 {
        match *self {
            Domain::Ball { radius } => radius - norm_sq(x).sqrt(),
            Domain::Slab { axis, lower, upper } => {
                if face == 0 {
                    x[axis] - lower
                } else {
                    upper - x[axis]
                }
            }
            Domain::Unbounded => f64::INFINITY,
        }
    }

    /// Outward unit normal of `face` at the point of the face closest to `x`.
    pub fn face_normal(&self, face: usize, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match *self {
            Domain::Ball { .. } => {
                let n = norm_sq(x).sqrt();
                if n > 0.0 {
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = xi / n;
                    }
                } else {
                    out[0] = 1.0;
                }
            }
            Domain::Slab { axis, .. } => out[axis] = if face == 0 { -1.0 } else { 1.0 },
            Domain::Unbounded => {}
        }
    }

    /// The face a point outside the domain lies beyond.
    pub fn face_beyond(&self, x: &[f64]) -> Option<usize> {
        match *self {
            Domain::Ball { radius } => (norm_sq(x) >= radius * radius).then_some(0),
            Domain::Slab { axis, lower, upper } => {
                if x[axis] <= lower {
                    Some(0)
                } else if x[axis] >= upper {
                    Some(1)
                } else {
                    None
                }
            }
            Domain::Unbounded => None,
        }
    }

    /// Moves `x` along `-c * direction` onto `face` and returns the scalar `c`,
    /// or `None` when the line through `x` along `direction` misses the face.
    ///
    /// Afterwards `contains(x)` is false.
    pub fn snap_to_face(&self, face: usize, x: &mut [f64], direction: &[f64]) -> Option<f64> {
        match *self {
            Domain::Ball { radius } => {
                // |x - c v|^2 = r^2, take the root of smallest magnitude.
                let vv = norm_sq(direction);
                if vv == 0.0 {
                    return None;
                }
                let xv: f64 = x.iter().zip(direction).map(|(a, b)| a * b).sum();
                let xx = norm_sq(x);
                let disc = xv * xv - vv * (xx - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let (c1, c2) = ((xv - sq) / vv, (xv + sq) / vv);
                let c = if c1.abs() <= c2.abs() { c1 } else { c2 };
                for (xi, vi) in x.iter_mut().zip(direction) {
                    *xi -= c * vi;
                }
                // Rounding can leave the point a hair inside.
                let mut guard = 0;
                while norm_sq(x) < radius * radius && guard < 8 {
                    let s = 1.0 + f64::EPSILON;
                    x.iter_mut().for_each(|xi| *xi *= s);
                    guard += 1;
                }
                Some(c)
            }
            Domain::Slab { axis, lower, upper } => {
                if direction[axis] == 0.0 {
                    return None;
                }
                let bound = if face == 0 { lower } else { upper };
                let c = (x[axis] - bound) / direction[axis];
                for (xi, vi) in x.iter_mut().zip(direction) {
                    *xi -= c * vi;
                }
                x[axis] = bound;
                Some(c)
            }
            Domain::Unbounded => None,
        }
    }
}

/// A semilinear elliptic PDE together with its forward-backward representation.
///
/// `drift` and `diffusion` define the forward diffusion `dX = mu(X) dt + sigma(X) dW`,
/// `generator` is `f(x, y, zeta)` of the backward equation with `zeta = grad u`,
/// and `terminal_value` is the Dirichlet data `g` evaluated at exit states.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn domain(&self) -> &Domain;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// `sigma(x)` as a row-major `d x d` matrix.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    /// `sigma(x) dw`. Override when `sigma` has structure worth exploiting.
    fn apply_diffusion(&self, x: &[f64], dw: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut sigma = vec![0.0; d * d];
        self.diffusion(x, &mut sigma);
        for (i, o) in out.iter_mut().enumerate() {
            *o = sigma[i * d..(i + 1) * d].iter().zip(dw).map(|(a, b)| a * b).sum();
        }
    }

    /// `|sigma(x)^T n|^2`, the diffusion rate of `X` along the direction `n`.
    fn normal_variance(&self, x: &[f64], normal: &[f64]) -> f64 {
        let d = self.dim();
        let mut sigma = vec![0.0; d * d];
        self.diffusion(x, &mut sigma);
        (0..d)
            .map(|k| (0..d).map(|i| normal[i] * sigma[i * d + k]).sum::<f64>().powi(2))
            .sum()
    }

    fn generator(&self, x: &[f64], y: f64, zeta: &[f64]) -> f64;

    /// Returns `(f, df/dy)` and writes `df/dzeta` into `dzeta`.
    ///
    /// Indicator factors are treated as locally constant.
    fn generator_partials(&self, x: &[f64], y: f64, zeta: &[f64], dzeta: &mut [f64]) -> (f64, f64);

    /// Boundary data `g` at an exit state.
    fn terminal_value(&self, x: &[f64]) -> f64;

    /// Terminal value assigned to paths still inside the domain at the horizon.
    fn cutoff_value(&self, x: &[f64]) -> f64;

    /// Analytic solution, when known.
    fn reference(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Projection applied after every Euler step (e.g. clamping probabilities).
    fn project_state(&self, _x: &mut [f64]) {}

    /// Range for the random initialization of the trainable `u(x)`.
    fn initial_value_range(&self) -> (f64, f64);
}

#[inline]
pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
