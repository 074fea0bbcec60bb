mod common;

use common::{Free, Still};
use elliptic_bsde::neural::{Network, NetworkLayout};
use elliptic_bsde::problems::{Dividend, DividendParams, Poisson, QuadraticGradient};
use elliptic_bsde::solver::{gradient_check, loss, rollout, rollout_recorded, SolverState, Tape};
use elliptic_bsde::{simulate_paths, Error, ExitRule, PathBatch, Problem, SimulationOptions, TimeGrid};
use proptest::prelude::*;

fn layout(d: usize) -> NetworkLayout {
    NetworkLayout::new(d, vec![6, 5], d).unwrap()
}

fn batch(problem: &dyn Problem, x0: &[f64], grid: &TimeGrid, m: usize, seed: u64) -> PathBatch {
    simulate_paths(problem, x0, grid, m, seed, SimulationOptions::default()).unwrap()
}

#[test]
fn loss_examples() {
    assert_eq!(loss(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
    assert_eq!(loss(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
    assert_eq!(loss(&[1.5], &[0.0]).unwrap(), 2.25);
    assert!(matches!(loss(&[], &[]), Err(Error::Argument(_))));
    assert!(matches!(loss(&[1.0], &[1.0, 2.0]), Err(Error::Argument(_))));
}

#[test]
fn no_dynamics_returns_the_initial_value() {
    let p = Still::new(2);
    let grid = TimeGrid::new(1.0, 6, 2.0).unwrap();
    let b = batch(&p, &[0.2, 0.1], &grid, 5, 1);
    let state = SolverState::new(&p, 6, layout(2), false, 3).unwrap();
    let y = rollout(&b, &state, &p, &grid).unwrap();
    assert!(y.iter().all(|&v| v == state.u0));
}

#[test]
fn constant_generator_telescopes_to_the_stopped_time() {
    let p = Poisson::new(2, 0.5, 0.75).unwrap();
    let grid = TimeGrid::new(0.5, 50, 2.0).unwrap();
    let b = batch(&p, &[0.1, 0.0], &grid, 64, 4);
    let mut state = SolverState::new(&p, 50, layout(2), false, 5).unwrap();
    state.freeze_gradient_model();
    let y = rollout(&b, &state, &p, &grid).unwrap();
    for (j, yj) in y.iter().enumerate() {
        let expected = state.u0 - 0.75 * b.stopped_time(j, &grid);
        assert!((yj - expected).abs() < 1e-14, "{yj} vs {expected}");
    }
}

#[test]
fn one_step_linear_generator_by_hand() {
    let delta = 0.7;
    let p = Free::new(1, delta);
    let grid = TimeGrid::new(0.3, 1, 2.0).unwrap();
    let b = batch(&p, &[0.0], &grid, 3, 9);
    let state = SolverState::from_parts(1.3, vec![0.4], Vec::new(), false);
    let y = rollout(&b, &state, &p, &grid).unwrap();
    for (j, yj) in y.iter().enumerate() {
        let expected = 1.3 * (1.0 + delta * 0.3) + 0.4 * b.increment(j, 0)[0];
        assert!((yj - expected).abs() < 1e-15);
    }
}

#[test]
fn quadratic_value_gradient() {
    // Without networks and noise the loss is (u0 - c)^2.
    let p = Still::new(1);
    let grid = TimeGrid::new(1.0, 1, 1.0).unwrap();
    let b = batch(&p, &[0.25], &grid, 1, 0);
    let c = b.terminal_xi()[0];
    let state = SolverState::from_parts(0.9, vec![0.0], Vec::new(), false);
    let mut tape = Tape::default();
    rollout_recorded(&b, &state, &p, &grid, &mut tape).unwrap();
    let g = tape.gradients(&b, &grid, &state, b.terminal_xi()).unwrap();
    assert!((g.u0 - 2.0 * (0.9 - c)).abs() < 1e-15);
}

#[test]
fn one_step_linear_model_gradient() {
    let p = Free::new(2, 0.0);
    let grid = TimeGrid::new(0.5, 1, 1.0).unwrap();
    let b = batch(&p, &[0.0, 0.0], &grid, 1, 2);
    let xi = b.terminal_xi()[0];
    let state = SolverState::from_parts(0.2, vec![0.3, -0.6], Vec::new(), false);
    let dw = b.increment(0, 0);
    let residual = 0.2 + 0.3 * dw[0] - 0.6 * dw[1] - xi;
    let mut tape = Tape::default();
    rollout_recorded(&b, &state, &p, &grid, &mut tape).unwrap();
    let g = tape.gradients(&b, &grid, &state, b.terminal_xi()).unwrap();
    for (gz, w) in g.z0.iter().zip(dw) {
        assert!((gz - 2.0 * residual * w).abs() < 1e-14);
    }
    assert!((g.u0 - 2.0 * residual).abs() < 1e-14);
}

#[test]
fn subnets_after_the_last_exit_do_not_matter() {
    let p = Poisson::new(2, 0.5, 0.75).unwrap();
    let grid = TimeGrid::new(2.0, 200, 1.0).unwrap();
    let b = batch(&p, &[0.0, 0.0], &grid, 16, 12);
    let last = *b.exit_indices().iter().max().unwrap();
    assert!(last < 150, "all paths should exit early, last exit {last}");
    let state = SolverState::new(&p, 200, layout(2), false, 1).unwrap();
    let y = rollout(&b, &state, &p, &grid).unwrap();
    let mut perturbed = state.clone();
    // Subnet k is used at step k + 1.
    for net in &mut perturbed.subnets_mut()[last - 1..] {
        net.params_mut().iter_mut().for_each(|v| *v += 3.0);
    }
    assert_eq!(rollout(&b, &perturbed, &p, &grid).unwrap(), y);
    perturbed.subnets_mut()[0].params_mut()[0] += 1.0;
    assert_ne!(rollout(&b, &perturbed, &p, &grid).unwrap(), y);
}

#[test]
fn mismatched_shapes_are_rejected() {
    let p = Poisson::new(2, 0.5, 0.75).unwrap();
    let grid = TimeGrid::new(0.5, 5, 2.0).unwrap();
    let other = TimeGrid::new(0.5, 6, 2.0).unwrap();
    let b = batch(&p, &[0.0, 0.0], &grid, 4, 1);
    let state = SolverState::new(&p, 5, layout(2), false, 1).unwrap();
    assert!(rollout(&b, &state, &p, &other).is_err());
    let wrong = SolverState::new(&p, 7, layout(2), false, 1).unwrap();
    assert!(rollout(&b, &wrong, &p, &grid).is_err());

    let mut tape = Tape::default();
    rollout_recorded(&b, &state, &p, &grid, &mut tape).unwrap();
    let g = tape.gradients(&b, &grid, &state, b.terminal_xi()).unwrap();
    assert!(g.subnet(3).is_ok());
    assert!(matches!(g.subnet(4), Err(Error::Contract(_))));
    let bigger = batch(&p, &[0.0, 0.0], &grid, 5, 1);
    assert!(matches!(tape.gradients(&bigger, &grid, &state, bigger.terminal_xi()), Err(Error::Contract(_))));
}

fn check(problem: &dyn Problem, x0: &[f64], horizon: f64, shared: bool, seed: u64) {
    let grid = TimeGrid::new(horizon, 5, 2.0).unwrap();
    let b = simulate_paths(problem, x0, &grid, 4, seed, SimulationOptions { exit_rule: ExitRule::Bridge, threads: 1 })
        .unwrap();
    let mut state = SolverState::new(problem, 5, layout(problem.dim()), shared, seed ^ 7).unwrap();
    // Move the networks away from the origin so every term contributes.
    for net in state.subnets_mut() {
        let l = net.layer_count() - 1;
        net.bias_mut(l).iter_mut().enumerate().for_each(|(i, b)| *b = 0.2 - 0.15 * i as f64);
    }
    let report = gradient_check(&b, &state, problem, &grid, 1e-5, 1e-10).unwrap();
    assert!(
        report.max_relative_error <= 1e-4,
        "{}: {report:?} exits {:?}",
        problem.name(),
        b.exit_indices()
    );
}

#[test]
fn poisson_gradients_match_finite_differences() {
    let p = Poisson::new(2, 0.5, 0.75).unwrap();
    check(&p, &[0.1, -0.2], 0.05, false, 1);
    check(&p, &[0.1, -0.2], 0.05, true, 2);
    check(&Poisson::new(1, 0.5, 0.75).unwrap(), &[0.3], 0.05, false, 3);
}

#[test]
fn quadratic_gradients_match_finite_differences() {
    let p = QuadraticGradient::new(2, 1.0).unwrap();
    check(&p, &[0.3, 0.2], 0.3, false, 4);
    check(&p, &[0.3, 0.2], 0.3, true, 5);
}

#[test]
fn dividend_gradients_match_finite_differences() {
    let p = Dividend::new(DividendParams::standard(2).unwrap()).unwrap();
    check(&p, &[0.5, 1.0], 5.0, false, 6);
    check(&p, &[0.3, 3.0], 5.0, true, 7);
}

#[test]
fn frozen_state_only_moves_the_value() {
    let p = QuadraticGradient::new(2, 1.0).unwrap();
    let grid = TimeGrid::new(0.5, 5, 2.0).unwrap();
    let b = batch(&p, &[0.0, 0.0], &grid, 4, 1);
    let mut state = SolverState::new(&p, 5, layout(2), false, 1).unwrap();
    state.freeze_gradient_model();
    let mut tape = Tape::default();
    rollout_recorded(&b, &state, &p, &grid, &mut tape).unwrap();
    let g = tape.gradients(&b, &grid, &state, b.terminal_xi()).unwrap();
    assert!(g.u0 != 0.0);
    assert!(g.z0.iter().all(|&v| v == 0.0));
    for k in 0..g.subnet_count() {
        assert!(g.subnet(k).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn zero_networks_give_zero_gradient_model() {
    let p = Poisson::new(2, 0.5, 0.75).unwrap();
    let nets = vec![Network::zeros(layout(2)).unwrap(); 2];
    let state = SolverState::from_parts(0.1, vec![0.0, 0.0], nets, false);
    let grid = TimeGrid::new(0.5, 3, 2.0).unwrap();
    let b = batch(&p, &[0.0, 0.0], &grid, 3, 3);
    let y = rollout(&b, &state, &p, &grid).unwrap();
    for (j, v) in y.iter().enumerate() {
        assert!((v - (0.1 - 0.75 * b.stopped_time(j, &grid))).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_rollout_gradients(seed in any::<u64>(), which in 0usize..3, m in 1usize..5, n in 1usize..6) {
        let (problem, x0, horizon): (Box<dyn Problem>, Vec<f64>, f64) = match which {
            0 => (Box::new(Poisson::new(2, 0.5, 0.75).unwrap()), vec![0.1, 0.1], 0.05),
            1 => (Box::new(QuadraticGradient::new(2, 1.0).unwrap()), vec![-0.2, 0.4], 0.3),
            _ => (Box::new(Dividend::new(DividendParams::standard(2).unwrap()).unwrap()), vec![0.6, 1.5], 3.0),
        };
        let grid = TimeGrid::new(horizon, n, 2.0).unwrap();
        let b = simulate_paths(problem.as_ref(), &x0, &grid, m, seed, SimulationOptions::default()).unwrap();
        let state = SolverState::new(problem.as_ref(), n, layout(2), false, seed).unwrap();
        let report = gradient_check(&b, &state, problem.as_ref(), &grid, 1e-5, 1e-10).unwrap();
        prop_assert!(report.max_relative_error <= 1e-4, "{:?}", report);
    }
}
