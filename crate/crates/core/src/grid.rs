use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition `0 = t_0 < t_1 < ... < t_N = T` of the simulation horizon.
///
/// Built by the power law `t_i = T (i/N)^gamma`; `gamma > 1` refines the grid
/// near zero, where most exits of the forward process happen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize, gamma: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::arg(format!("horizon T must be positive and finite, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::arg("number of time steps N must be at least 1"));
        }
        if !gamma.is_finite() || gamma < 1.0 {
            return Err(Error::arg(format!("stretch exponent gamma must be >= 1, got {gamma}")));
        }
        let n = steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| horizon * (i as f64 / n).powf(gamma)).collect();
        times[steps] = horizon;
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg(format!(
                "grid (T={horizon}, N={steps}, gamma={gamma}) is not strictly increasing in floating point"
            )));
        }
        Ok(Self { times })
    }

    /// Builds a grid from explicit time points.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::arg("a grid needs at least two points starting at 0"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("grid times must be finite and strictly increasing"));
        }
        Ok(Self { times })
    }

    /// Number of steps N.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.steps()]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// `t_{n+1} - t_n`.
    #[inline]
    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_grid() {
        let g = TimeGrid::new(1.0, 1, 2.0).unwrap();
        assert_eq!(g.times(), &[0.0, 1.0]);
    }

    #[test]
    fn equidistant_grid() {
        let g = TimeGrid::new(1.0, 4, 1.0).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn poisson_default_grid() {
        let g = TimeGrid::new(0.5, 500, 2.0).unwrap();
        assert!((g.time(1) - 2e-6).abs() < 1e-18);
        assert_eq!(g.time(500), 0.5);
        assert!(g.dt(0) < g.dt(499));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(TimeGrid::new(0.0, 4, 1.0).is_err());
        assert!(TimeGrid::new(-1.0, 4, 1.0).is_err());
        assert!(TimeGrid::new(f64::NAN, 4, 1.0).is_err());
        assert!(TimeGrid::new(f64::INFINITY, 4, 1.0).is_err());
        assert!(TimeGrid::new(1.0, 0, 1.0).is_err());
        assert!(TimeGrid::new(1.0, 4, 0.5).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.2, 0.2]).is_err());
    }

    proptest! {
        #[test]
        fn grid_endpoints_and_monotonicity(t in 1e-3f64..100.0, n in 1usize..2000, gamma in 1.0f64..4.0) {
            let g = TimeGrid::new(t, n, gamma).unwrap();
            prop_assert_eq!(g.time(0), 0.0);
            prop_assert_eq!(g.horizon(), t);
            prop_assert_eq!(g.steps(), n);
            for w in g.times().windows(2) {
                prop_assert!(w[1] > w[0]);
            }
        }

        #[test]
        fn unit_exponent_is_equidistant(t in 1e-3f64..100.0, n in 1usize..2000) {
            let g = TimeGrid::new(t, n, 1.0).unwrap();
            let h = t / n as f64;
            for k in 0..n {
                prop_assert!((g.dt(k) - h).abs() <= 1e-12 * t.max(1.0));
            }
        }
    }
}
