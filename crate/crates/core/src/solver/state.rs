use crate::error::{Error, Result};
use crate::neural::{Network, NetworkLayout};
use crate::problem::Problem;
use crate::rng::{derive_seed, Stream};

/// Trainable quantities of one run: `u0 ≈ u(x)`, `z0 ≈ ∇u(x)` and the
/// networks approximating `∇u(X_{t_n})` at the interior grid times.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub u0: f64,
    pub z0: Vec<f64>,
    subnets: Vec<Network>,
    shared: bool,
    frozen: bool,
}

impl SolverState {
    /// Random initial state for a grid with `steps` steps.
    ///
    /// `u0` is uniform on the problem's initial range, `z0` uniform on
    /// `[-0.1, 0.1]^d`; subnetwork `k` is seeded with `derive_seed(seed, [1, k])`.
    pub fn new(problem: &dyn Problem, steps: usize, layout: NetworkLayout, shared: bool, seed: u64) -> Result<Self> {
        let d = problem.dim();
        if layout.input_dim != d || layout.output_dim != d {
            return Err(Error::arg(format!("network layout must map R^{d} to R^{d}")));
        }
        let mut rng = Stream::new(derive_seed(seed, &[0]));
        let (lo, hi) = problem.initial_value_range();
        let u0 = rng.uniform_in(lo, hi);
        let z0 = (0..d).map(|_| rng.uniform_in(-0.1, 0.1)).collect();
        let count = match (steps, shared) {
            (0 | 1, _) => 0,
            (_, true) => 1,
            (n, false) => n - 1,
        };
        let subnets = (0..count)
            .map(|k| Network::init(layout.clone(), derive_seed(seed, &[1, k as u64])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { u0, z0, subnets, shared, frozen: false })
    }

    /// Builds a state from explicit parts; `subnets` must hold `steps - 1`
    /// networks (or one when `shared`).
    pub fn from_parts(u0: f64, z0: Vec<f64>, subnets: Vec<Network>, shared: bool) -> Self {
        Self { u0, z0, subnets, shared, frozen: false }
    }

    pub fn subnets(&self) -> &[Network] {
        &self.subnets
    }

    pub fn subnets_mut(&mut self) -> &mut [Network] {
        &mut self.subnets
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    /// Index into [`subnets`](Self::subnets) of the network used at grid step `n >= 1`.
    #[inline]
    pub fn subnet_index(&self, n: usize) -> usize {
        debug_assert!(n >= 1);
        if self.shared {
            0
        } else {
            n - 1
        }
    }

    /// Sets `z0` and every network to zero and keeps them there: only `u0`
    /// is trained afterwards.
    pub fn freeze_gradient_model(&mut self) {
        self.z0.iter_mut().for_each(|v| *v = 0.0);
        for net in &mut self.subnets {
            net.params_mut().fill(0.0);
        }
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn is_finite(&self) -> bool {
        self.u0.is_finite()
            && self.z0.iter().all(|v| v.is_finite())
            && self.subnets.iter().all(|n| n.params().iter().all(|v| v.is_finite()))
    }

    /// Sizes of the parameter groups `[u0, z0, subnet_0, ...]`.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1, self.z0.len()];
        sizes.extend(self.subnets.iter().map(|n| n.params().len()));
        sizes
    }

    /// Mutable parameter groups in the order of [`group_sizes`](Self::group_sizes).
    pub fn groups_mut(&mut self) -> Vec<&mut [f64]> {
        let mut groups: Vec<&mut [f64]> = vec![std::slice::from_mut(&mut self.u0), &mut self.z0];
        groups.extend(self.subnets.iter_mut().map(|n| n.params_mut()));
        groups
    }
}
