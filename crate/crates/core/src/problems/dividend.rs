use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Domain, Problem};

/// Intensity matrix of the hidden market-state chain.
///
/// With 1-based indices: `q_ii = -0.5` for even `i`, `-0.25` for odd `i`;
/// `q_{i,i-1} = 0.5` for even `i`, `0.25` for odd `i >= 3`; `q_{1,d} = 0.25`;
/// all other entries vanish. Every row sums to zero.
pub fn intensity_matrix(d: usize) -> Result<Vec<Vec<f64>>> {
    if d < 2 {
        return Err(Error::arg(format!("intensity matrix needs d >= 2, got {d}")));
    }
    let mut q = vec![vec![0.0; d]; d];
    for i in 1..=d {
        for j in 1..=d {
            let v = if i == j {
                if i % 2 == 0 {
                    -0.5
                } else {
                    -0.25
                }
            } else if i == j + 1 {
                if i % 2 == 0 {
                    0.5
                } else {
                    0.25
                }
            } else if i == 1 && j == d {
                0.25
            } else {
                0.0
            };
            q[i - 1][j - 1] = v;
        }
    }
    Ok(q)
}

/// Writes the matrix as `d` comma-separated rows.
pub fn write_intensity_csv<W: Write>(q: &[Vec<f64>], mut out: W) -> io::Result<()> {
    for row in q {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parameters of the dividend maximization problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DividendParams {
    pub dim: usize,
    /// Surplus level at which the domain is cut off.
    pub r: f64,
    /// Maximal dividend rate.
    #[serde(rename = "K")]
    pub k: f64,
    pub delta: f64,
    pub rho: f64,
    /// Surplus trend in each hidden state.
    pub a: Vec<f64>,
    /// Intensity matrix, row-major rows.
    pub q: Vec<Vec<f64>>,
    /// Paths that survive to the horizon are paid `K/delta` when their
    /// surplus is at least `cutoff_fraction * r`, else 0.
    pub cutoff_fraction: f64,
}

impl DividendParams {
    /// `r = 5, K = 1.8, delta = 0.5, rho = 1, a_i = 2 - i/d` and the
    /// standard intensity matrix.
    pub fn standard(dim: usize) -> Result<Self> {
        let q = intensity_matrix(dim)?;
        let a = (1..=dim).map(|i| 2.0 - i as f64 / dim as f64).collect();
        Ok(Self { dim, r: 5.0, k: 1.8, delta: 0.5, rho: 1.0, a, q, cutoff_fraction: 0.5 })
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d < 2 {
            return Err(Error::arg("dividend problem needs d >= 2"));
        }
        for (name, v) in [("r", self.r), ("K", self.k), ("delta", self.delta), ("rho", self.rho)] {
            super::check_positive(name, v)?;
        }
        if !(0.0..=1.0).contains(&self.cutoff_fraction) {
            return Err(Error::arg("cutoff_fraction must lie in [0, 1]"));
        }
        if self.a.len() != d || self.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("trend vector a must have {d} finite entries")));
        }
        if self.q.len() != d || self.q.iter().any(|row| row.len() != d) {
            return Err(Error::arg(format!("intensity matrix must be {d}x{d}")));
        }
        for (i, row) in self.q.iter().enumerate() {
            let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if row.iter().sum::<f64>().abs() > 1e-12 * scale {
                return Err(Error::arg(format!("row {} of the intensity matrix does not sum to 0", i + 1)));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || (i == j && v > 0.0) || (i != j && v < 0.0) {
                    return Err(Error::arg(format!("invalid intensity q[{}][{}] = {v}", i + 1, j + 1)));
                }
            }
        }
        Ok(())
    }

    /// `K / delta`, the value of paying the maximal rate forever.
    pub fn value_cap(&self) -> f64 {
        self.k / self.delta
    }
}

/// HJB equation of De Finetti's dividend problem under a hidden Markov
/// trend, in its complete-information form.
///
/// The state is `(pi_1, ..., pi_{d-1}, x_d)`: filter probabilities of the
/// first `d-1` market states and the dividend-free surplus. The domain is
/// `0 < x_d < r` with no restriction on the probabilities, which are clamped
/// to `[0, 1]` after every Euler step.
#[derive(Clone, Debug, PartialEq)]
pub struct Dividend {
    params: DividendParams,
    domain: Domain,
    /// For each probability coordinate `i`, the nonzero `(j, q_ji - q_di)`
    /// with `j < d-1`.
    drift_terms: Vec<Vec<(usize, f64)>>,
}

impl Dividend {
    pub fn new(params: DividendParams) -> Result<Self> {
        params.validate()?;
        let d = params.dim;
        let last = &params.q[d - 1];
        let drift_terms = (0..d - 1)
            .map(|i| {
                (0..d - 1)
                    .filter_map(|j| {
                        let c = params.q[j][i] - last[i];
                        (c != 0.0).then_some((j, c))
                    })
                    .collect()
            })
            .collect();
        let domain = Domain::Slab { axis: d - 1, lower: 0.0, upper: params.r };
        Ok(Self { params, domain, drift_terms })
    }

    pub fn params(&self) -> &DividendParams {
        &self.params
    }

    /// Filtered surplus trend `a_d + sum_{j<d} (a_j - a_d) x_j`.
    pub fn trend(&self, x: &[f64]) -> f64 {
        let d = self.params.dim;
        let a = &self.params.a;
        a[d - 1] + (0..d - 1).map(|j| (a[j] - a[d - 1]) * x[j]).sum::<f64>()
    }

    fn first_column(&self, x: &[f64], out: &mut [f64]) {
        let d = self.params.dim;
        let nu = self.trend(x);
        let rho = self.params.rho;
        for i in 0..d - 1 {
            out[i] = x[i] * (self.params.a[i] - nu) / rho;
        }
        out[d - 1] = rho;
    }
}

impl Problem for Dividend {
    fn name(&self) -> &str {
        "dividend"
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let d = self.params.dim;
        let last = &self.params.q[d - 1];
        for i in 0..d - 1 {
            out[i] = last[i] + self.drift_terms[i].iter().map(|&(j, c)| c * x[j]).sum::<f64>();
        }
        out[d - 1] = self.trend(x);
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let d = self.params.dim;
        out.fill(0.0);
        let mut col = vec![0.0; d];
        self.first_column(x, &mut col);
        for i in 0..d {
            out[i * d] = col[i];
        }
    }

    fn apply_diffusion(&self, x: &[f64], dw: &[f64], out: &mut [f64]) {
        self.first_column(x, out);
        for o in out.iter_mut() {
            *o *= dw[0];
        }
    }

    fn normal_variance(&self, x: &[f64], normal: &[f64]) -> f64 {
        let d = self.params.dim;
        let mut col = vec![0.0; d];
        self.first_column(x, &mut col);
        col.iter().zip(normal).map(|(c, n)| c * n).sum::<f64>().powi(2)
    }

    fn generator(&self, _x: &[f64], y: f64, zeta: &[f64]) -> f64 {
        let p = &self.params;
        let zd = zeta[p.dim - 1];
        let payout = if zd <= 1.0 { p.k * (1.0 - zd) } else { 0.0 };
        payout - p.delta * y
    }

    fn generator_partials(&self, x: &[f64], y: f64, zeta: &[f64], dzeta: &mut [f64]) -> (f64, f64) {
        let p = &self.params;
        dzeta.fill(0.0);
        if zeta[p.dim - 1] <= 1.0 {
            dzeta[p.dim - 1] = -p.k;
        }
        (self.generator(x, y, zeta), -p.delta)
    }

    fn terminal_value(&self, x: &[f64]) -> f64 {
        // Exit states sit on (or beyond) one of the two faces.
        let p = &self.params;
        if x[p.dim - 1] >= 0.5 * p.r {
            p.value_cap()
        } else {
            0.0
        }
    }

    fn cutoff_value(&self, x: &[f64]) -> f64 {
        let p = &self.params;
        if x[p.dim - 1] >= p.cutoff_fraction * p.r {
            p.value_cap()
        } else {
            0.0
        }
    }

    fn project_state(&self, x: &mut [f64]) {
        let d = self.params.dim;
        for v in &mut x[..d - 1] {
            *v = v.clamp(0.0, 1.0);
        }
    }

    fn initial_value_range(&self) -> (f64, f64) {
        (0.0, self.params.value_cap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn intensity_matrix_d2() {
        assert_eq!(intensity_matrix(2).unwrap(), vec![vec![-0.25, 0.25], vec![0.5, -0.5]]);
        assert!(intensity_matrix(1).is_err());
    }

    #[test]
    fn intensity_matrix_d4_entry() {
        let q = intensity_matrix(4).unwrap();
        assert_eq!(q[2][1], 0.25);
        assert_eq!(q[3][2], 0.5);
        assert_eq!(q[0][3], 0.25);
        assert_eq!(q[1][1], -0.5);
        assert_eq!(q[2][2], -0.25);
    }

    #[test]
    fn intensity_rows_sum_to_zero_exhaustively() {
        for d in 2..=128 {
            let q = intensity_matrix(d).unwrap();
            for (i, row) in q.iter().enumerate() {
                // Brute-force summation in both directions.
                let fwd: f64 = row.iter().sum();
                let bwd: f64 = row.iter().rev().sum();
                assert_eq!(fwd, 0.0, "d={d} row={i}");
                assert_eq!(bwd, 0.0);
                for (j, &v) in row.iter().enumerate() {
                    if i != j {
                        assert!(v >= 0.0);
                    } else {
                        assert!(v <= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn trend_hand_evaluation() {
        let p = Dividend::new(DividendParams::standard(2).unwrap()).unwrap();
        assert_eq!(p.params().a, vec![1.5, 1.0]);
        assert_eq!(p.trend(&[0.5, 2.0]), 1.25);
    }

    #[test]
    fn generator_values() {
        let p = Dividend::new(DividendParams::standard(2).unwrap()).unwrap();
        assert_eq!(p.generator(&[0.5, 1.0], 1.0, &[0.0, 2.0]), -0.5);
        // Tie pays the dividend branch: 1.8 * 0 - 0.5 * 1.
        assert_eq!(p.generator(&[0.5, 1.0], 1.0, &[0.0, 1.0]), -0.5);
        let f = p.generator(&[0.5, 1.0], 1.0, &[0.0, 0.5]);
        assert!((f - (0.9 - 0.5)).abs() < 1e-15);
        let mut dz = [0.0; 2];
        let (_, fy) = p.generator_partials(&[0.5, 1.0], 1.0, &[0.3, 1.0], &mut dz);
        assert_eq!(fy, -0.5);
        assert_eq!(dz, [0.0, -1.8]);
    }

    #[test]
    fn boundary_values() {
        let p = Dividend::new(DividendParams::standard(2).unwrap()).unwrap();
        assert!((p.terminal_value(&[0.5, 5.0]) - 3.6).abs() < 1e-15);
        assert_eq!(p.terminal_value(&[0.5, 0.0]), 0.0);
        assert_eq!(p.terminal_value(&[0.5, -0.1]), 0.0);
        assert!((p.cutoff_value(&[0.5, 2.5]) - 3.6).abs() < 1e-15);
        assert_eq!(p.cutoff_value(&[0.5, 2.4]), 0.0);
    }

    #[test]
    fn drift_matches_dense_formula() {
        let params = DividendParams::standard(5).unwrap();
        let p = Dividend::new(params.clone()).unwrap();
        let x = [0.1, 0.2, 0.3, 0.15, 1.7];
        let mut mu = [0.0; 5];
        p.drift(&x, &mut mu);
        let q = &params.q;
        for i in 0..4 {
            let dense = q[4][i] + (0..4).map(|j| (q[j][i] - q[4][i]) * x[j]).sum::<f64>();
            assert!((mu[i] - dense).abs() < 1e-15);
        }
        assert_eq!(mu[4], p.trend(&x));
    }

    #[test]
    fn diffusion_has_a_single_column() {
        let p = Dividend::new(DividendParams::standard(4).unwrap()).unwrap();
        let x = [0.2, 0.3, 0.1, 2.0];
        let mut s = [0.0; 16];
        p.diffusion(&x, &mut s);
        for i in 0..4 {
            for k in 1..4 {
                assert_eq!(s[i * 4 + k], 0.0);
            }
        }
        assert_eq!(s[12], 1.0);
        let nu = p.trend(&x);
        assert!((s[0] - 0.2 * (p.params().a[0] - nu)).abs() < 1e-15);

        let dw = [0.3, -1.0, 2.0, 0.5];
        let mut fast = [0.0; 4];
        p.apply_diffusion(&x, &dw, &mut fast);
        for i in 0..4 {
            assert!((fast[i] - s[i * 4] * 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut p = DividendParams::standard(3).unwrap();
        p.k = 0.0;
        assert!(Dividend::new(p).is_err());
        let mut p = DividendParams::standard(3).unwrap();
        p.q[0][0] = -0.3;
        assert!(Dividend::new(p).is_err());
        let mut p = DividendParams::standard(3).unwrap();
        p.a.pop();
        assert!(Dividend::new(p).is_err());
    }

    #[test]
    fn intensity_csv_rows() {
        let mut buf = Vec::new();
        write_intensity_csv(&intensity_matrix(2).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "-0.25,0.25\n0.5,-0.5\n");
    }

    proptest! {
        #[test]
        fn trend_stays_within_trend_range(d in 2usize..12, raw in proptest::collection::vec(0.0f64..1.0, 11)) {
            let p = Dividend::new(DividendParams::standard(d).unwrap()).unwrap();
            // Scale a random point into the simplex.
            let total: f64 = raw[..d - 1].iter().sum::<f64>() + 1.0;
            let mut x: Vec<f64> = raw[..d - 1].iter().map(|v| v / total).collect();
            x.push(1.0);
            let nu = p.trend(&x);
            let lo = p.params().a.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = p.params().a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(nu >= lo - 1e-12 && nu <= hi + 1e-12);
        }

        #[test]
        fn diffusion_rank_at_most_one(d in 2usize..8, raw in proptest::collection::vec(-1.0f64..2.0, 8)) {
            let p = Dividend::new(DividendParams::standard(d).unwrap()).unwrap();
            let x = &raw[..d];
            let mut s = vec![0.0; d * d];
            p.diffusion(x, &mut s);
            for i in 0..d {
                for k in 1..d {
                    prop_assert_eq!(s[i * d + k], 0.0);
                }
            }
        }

        #[test]
        fn payout_bounds(zd in -10.0f64..10.0, y in -5.0f64..5.0) {
            let p = Dividend::new(DividendParams::standard(2).unwrap()).unwrap();
            let payout = p.generator(&[0.5, 1.0], y, &[0.0, zd]) + p.params().delta * y;
            if zd <= 1.0 {
                prop_assert!(payout >= 0.0);
            }
            prop_assert!(payout <= p.params().k * (1.0 + zd.abs()) + 1e-12);
        }
    }
}
