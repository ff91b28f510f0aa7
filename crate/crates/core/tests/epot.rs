mod common;

use common::{problem, random_problem, rng};
use potkit_core::data::{sample_histogram_pair, Distribution};
use potkit_core::*;

const E: Regularizer = Regularizer::Entropic;

/// Tight tolerance with the plateau guard effectively off.
fn exact() -> SolverConfig {
    SolverConfig { kkt_tolerance: 1e-12, max_iterations: 200_000, stall_window: 200_000, ..Default::default() }
}

#[test]
fn zero_mass_gives_zero_plan() {
    let p = problem(&[0.4, 0.6], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.0, 0.1, E);
    let x = solve_epot(&p, &SolverConfig::default()).unwrap();
    assert!(x.entries().iter().all(|&e| e == 0.0));
}

#[test]
fn single_entry_is_forced() {
    for (cost, eps) in [(0.0, 1.0), (0.9, 1e-3), (0.3, 1e-6)] {
        let p = problem(&[1.0], &[1.0], &[cost], 1.0, eps, E);
        let x = solve_epot(&p, &SolverConfig::default()).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-12, "{x:?}");
    }
}

#[test]
fn rejects_quadratic_problems() {
    let p = problem(&[1.0], &[1.0], &[0.0], 1.0, 0.1, Regularizer::Quadratic);
    assert!(solve_epot(&p, &SolverConfig::default()).is_err());
}

#[test]
fn matches_entropic_oracle_on_small_instances() {
    let mut rng = rng(31);
    for n in 2..=3 {
        for k in 0..6 {
            let lambda = [0.3, 0.7, 1.0][k % 3];
            let eps = [0.5, 0.05][k / 3];
            let p = random_problem(&mut rng, n, lambda, eps, E);
            let oracle = oracle_epot(&p).unwrap();
            let x = solve_epot(&p, &exact()).unwrap();
            assert!(x.converged);
            let d = (objective_epot(&p, &oracle).unwrap() - objective_epot(&p, &x).unwrap()).abs();
            assert!(d <= 1e-6, "n={n} lambda={lambda} eps={eps}: objective gap {d:e}");
        }
    }
}

#[test]
fn log_domain_agrees_with_direct_iteration() {
    let mut rng = rng(5);
    for (n, eps) in [(4, 0.1), (7, 0.3), (10, 1.0)] {
        let p = random_problem(&mut rng, n, 0.6, eps, E);
        let direct = solve_epot_direct(&p, 20_000).unwrap();
        let mut state = ScalingState::new(&p).unwrap();
        for _ in 0..20_000 {
            state.sweep();
        }
        let log = state.plan();
        assert!(log.max_abs_diff(&direct) <= 1e-10, "n={n}: {:e}", log.max_abs_diff(&direct));
    }
}

#[test]
fn direct_iteration_refuses_underflowing_kernels() {
    let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.5, 1e-3, E);
    assert!(solve_epot_direct(&p, 10).is_err());
}

#[test]
fn each_projection_satisfies_its_own_constraint() {
    let mut rng = rng(12);
    let p = random_problem(&mut rng, 8, 0.7, 0.05, E);
    let s = p.mass();
    let mut state = ScalingState::new(&p).unwrap();
    for _ in 0..3 {
        state.project_rows();
        let rep = check_feasibility(&p, &state.plan(), 0.0);
        assert!(rep.row_violation <= 1e-14, "{rep:?}");

        state.project_cols();
        let rep = check_feasibility(&p, &state.plan(), 0.0);
        assert!(rep.col_violation <= 1e-14, "{rep:?}");

        state.project_mass();
        let total = state.plan().total();
        assert!((total - s).abs() <= 1e-13, "{total} vs {s}");
    }
}

#[test]
fn converged_plans_are_feasible_and_dense() {
    let mut rng = rng(8);
    for (n, eps) in [(6, 0.5), (25, 0.05), (50, 0.01)] {
        let p = random_problem(&mut rng, n, 0.7, eps, E);
        let x = solve_epot(&p, &SolverConfig::default()).unwrap();
        assert!(x.converged);
        let rep = check_feasibility(&p, &x, 0.0);
        assert!(rep.max_violation() <= 1e-9, "{rep:?}");
        assert!(x.entries().iter().all(|&e| e > 0.0));
    }
}

#[test]
fn toy_plans_are_strictly_positive() {
    let pair = sample_histogram_pair(Distribution::GAMMA, Distribution::MIXED_GAUSSIAN, 100_000, 100, 0).unwrap();
    let pos: Vec<[f64; 1]> = pair.centers.iter().map(|&x| [x]).collect();
    let cost = cost_matrix_from_positions(&pos, &pos, true).unwrap();
    let (r, c) = (pair.source.values(), pair.target.values());
    for eps in [1.0, 0.1, 1e-2] {
        let p = PotProblem::with_lambda(pair.source.clone(), pair.target.clone(), cost.clone(), 0.7, eps, E).unwrap();
        let x = solve_epot(&p, &SolverConfig::default()).unwrap();
        assert!(x.converged, "eps={eps}");
        // Empty bins force zero rows and columns; everything else is positive.
        for i in (0..100).filter(|&i| r[i] > 0.0) {
            for j in (0..100).filter(|&j| c[j] > 0.0) {
                assert!(x.get(i, j) > 0.0, "eps={eps}: ({i},{j}) is zero");
            }
        }
        let q = p.with_regularizer(Regularizer::Quadratic, eps).unwrap();
        let (qx, _) = solve_qpot(&q, &SolverConfig::default()).unwrap();
        let (se, sq) = (sparsity(&x, 1e-10), sparsity(&qx, 1e-10));
        assert!(se < sq, "eps={eps}: entropic {se}, quadratic {sq}");
    }
}

#[test]
fn rounding_leaves_feasible_plans_alone() {
    let mut rng = rng(21);
    let p = random_problem(&mut rng, 6, 0.5, 0.1, E);
    let x = solve_epot(&p, &SolverConfig::default()).unwrap();
    let again = round_to_feasible(&x, &p).unwrap();
    assert!(again.max_abs_diff(&x) <= 1e-15);
}

#[test]
fn rounding_undoes_pure_scaling() {
    let mut rng = rng(22);
    let p = random_problem(&mut rng, 6, 0.5, 0.1, E);
    let x = solve_epot(&p, &SolverConfig::default()).unwrap();
    let back = round_to_feasible(&x.scaled(2.0), &p).unwrap();
    assert!(back.max_abs_diff(&x) <= 1e-12, "{:e}", back.max_abs_diff(&x));
}

#[test]
fn rounding_is_idempotent() {
    let mut rng = rng(23);
    for _ in 0..5 {
        let p = random_problem(&mut rng, 7, 0.8, 0.05, E);
        let loose = solve_epot(&p, &SolverConfig { kkt_tolerance: 1e-2, ..Default::default() }).unwrap();
        let once = round_to_feasible(&loose, &p).unwrap();
        let twice = round_to_feasible(&once, &p).unwrap();
        assert!(twice.max_abs_diff(&once) <= 1e-12);
    }
}

#[test]
fn rounding_repairs_a_loose_iterate() {
    let mut rng = rng(24);
    for _ in 0..5 {
        let p = random_problem(&mut rng, 10, 0.7, 0.05, E);
        let mut state = ScalingState::new(&p).unwrap();
        let mut sweeps = 0;
        while state.residual() > 1e-4 {
            state.sweep();
            sweeps += 1;
            assert!(sweeps < 100_000);
        }
        let raw = state.plan();
        let before = check_feasibility(&p, &raw, 0.0);
        let fixed = round_to_feasible(&raw, &p).unwrap();
        let after = check_feasibility(&p, &fixed, 0.0);
        assert!(after.max_violation() <= 1e-9 * p.mass().max(1.0), "{after:?}");
        assert!(fixed.entries().iter().all(|&e| e >= 0.0));

        let moved: f64 = fixed.entries().iter().zip(raw.entries()).map(|(a, b)| (a - b).abs()).sum();
        let bound = 3.0 * (before.row_violation * 10.0 + before.col_violation * 10.0 + before.mass_error);
        assert!(moved <= bound, "moved {moved:e}, bound {bound:e}");

        let change = (objective_epot(&p, &fixed).unwrap() - objective_epot(&p, &raw).unwrap()).abs();
        assert!(change <= 1e-3, "objective moved by {change:e}");
    }
}

#[test]
fn rounding_rejects_an_empty_plan() {
    let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.5, 0.1, E);
    assert!(round_to_feasible(&TransportPlan::zeros(2), &p).is_err());
}
