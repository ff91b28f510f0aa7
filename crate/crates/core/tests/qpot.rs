mod common;

use common::{problem, random_problem, rng};
use potkit_core::*;
use proptest::prelude::*;
use rand::Rng;

const Q: Regularizer = Regularizer::Quadratic;

#[test]
fn primal_from_dual_examples() {
    let p = problem(&[1.0], &[1.0], &[1.0], 1.0, 0.5, Q);
    let x = primal_from_dual(&p, &[0.0], &[0.0], 2.0).unwrap();
    assert_eq!(x.entries(), &[2.0]);

    let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.2, 0.7, 0.4, 0.9], 0.5, 0.1, Q);
    let x = primal_from_dual(&p, &[0.0; 2], &[0.0; 2], 0.2).unwrap();
    assert!(x.entries().iter().all(|&e| e == 0.0));
}

#[test]
fn dual_value_and_gradient_at_zero_plan() {
    let p = problem(&[0.3, 0.7], &[0.6, 0.4], &[0.2, 0.7, 0.4, 0.9], 0.5, 0.1, Q);
    let tau = 0.1;
    assert_eq!(dual_value(&p, &[0.0; 2], &[0.0; 2], tau).unwrap(), tau * 0.5);
    let g = dual_gradient(&p, &[0.0; 2], &[0.0; 2], tau).unwrap();
    assert_eq!(g.u, vec![-0.3, -0.7]);
    assert_eq!(g.v, vec![-0.6, -0.4]);
    assert_eq!(g.tau, 0.5);

    let p = problem(&[0.3, 0.7], &[0.6, 0.4], &[0.2, 0.7, 0.4, 0.9], 0.0, 0.1, Q);
    assert_eq!(dual_value(&p, &[0.0; 2], &[0.0; 2], 0.0).unwrap(), 0.0);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = rng(11);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 20 {
        let eps = rng.random_range(0.05..1.0);
        let p = random_problem(&mut rng, 5, 0.7, eps, Q);
        let u: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..0.3)).collect();
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..0.3)).collect();
        let tau = rng.random_range(0.3..1.2);
        let kink_free = (0..5).all(|i| (0..5).all(|j| (tau - p.cost().get(i, j) - u[i] - v[j]).abs() > 1e-3));
        if !kink_free {
            continue;
        }
        checked += 1;
        let g = dual_gradient(&p, &u, &v, tau).unwrap();
        let f = |u: &[f64], v: &[f64], t: f64| dual_value(&p, u, v, t).unwrap();
        for k in 0..5 {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[k] += h;
            um[k] -= h;
            let fd = (f(&up, &v, tau) - f(&um, &v, tau)) / (2.0 * h);
            assert!((fd - g.u[k]).abs() < 1e-4, "u[{k}]: {fd} vs {}", g.u[k]);
            let (mut vp, mut vm) = (v.clone(), v.clone());
            vp[k] += h;
            vm[k] -= h;
            let fd = (f(&u, &vp, tau) - f(&u, &vm, tau)) / (2.0 * h);
            assert!((fd - g.v[k]).abs() < 1e-4, "v[{k}]: {fd} vs {}", g.v[k]);
        }
        let fd = (f(&u, &v, tau + h) - f(&u, &v, tau - h)) / (2.0 * h);
        assert!((fd - g.tau).abs() < 1e-4, "tau: {fd} vs {}", g.tau);
    }
}

#[test]
fn oracle_duals_reproduce_oracle_plan() {
    let mut rng = rng(5);
    for n in [2, 3] {
        for _ in 0..10 {
            let p = random_problem(&mut rng, n, 0.7, 0.5, Q);
            let (plan, cert) = oracle_qpot(&p).unwrap();
            let x = primal_from_dual(&p, &cert.u, &cert.v, cert.tau).unwrap();
            assert!(x.max_abs_diff(&plan) < 1e-8);
            // Strong duality at the oracle optimum.
            let g = dual_value(&p, &cert.u, &cert.v, cert.tau).unwrap();
            assert!((g - objective_qpot(&p, &plan).unwrap()).abs() < 1e-8);
            // Gradient vanishes on the tight constraints and the mass equality.
            let grad = dual_gradient(&p, &cert.u, &cert.v, cert.tau).unwrap();
            assert!(grad.tau.abs() < 1e-7);
            for (g, u) in grad.u.iter().zip(&cert.u) {
                assert!(*g < 1e-7 && (*u == 0.0 || g.abs() < 1e-7));
            }
            for (g, v) in grad.v.iter().zip(&cert.v) {
                assert!(*g < 1e-7 && (*v == 0.0 || g.abs() < 1e-7));
            }
        }
    }
}

#[test]
fn zero_mass_short_circuits() {
    let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.0, 0.1, Q);
    let (plan, cert) = solve_qpot(&p, &SolverConfig::default()).unwrap();
    assert!(plan.entries().iter().all(|&x| x == 0.0));
    assert_eq!(cert.kkt_residual, 0.0);
    assert!(plan.converged);
}

#[test]
fn two_by_two_matches_oracle() {
    let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.5, 0.1, Q);
    let (plan, cert) = solve_qpot(&p, &SolverConfig::default()).unwrap();
    let (oplan, _) = oracle_qpot(&p).unwrap();
    assert!(plan.converged);
    assert!(plan.max_abs_diff(&oplan) < 1e-6);
    assert!((objective_qpot(&p, &plan).unwrap() - objective_qpot(&p, &oplan).unwrap()).abs() < 1e-8);
    assert!(cert.u.iter().chain(&cert.v).all(|&m| m >= 0.0));
}

#[test]
fn weak_duality_holds_at_every_iterate() {
    let mut rng = rng(21);
    for n in 1..=4 {
        for _ in 0..5 {
            let p = random_problem(&mut rng, n, 0.7, 0.05, Q);
            let (oplan, _) = oracle_qpot(&p).unwrap();
            let primal = objective_qpot(&p, &oplan).unwrap();
            let mut seen = 0;
            solve_qpot_observed(&p, &SolverConfig::default(), |info| {
                seen += 1;
                assert!(info.dual_value <= primal + 1e-8, "{} > {primal}", info.dual_value);
            })
            .unwrap();
            assert!(seen > 0);
        }
    }
}

#[test]
fn unaccelerated_ascent_is_monotone() {
    let mut rng = rng(8);
    let cfg = SolverConfig { acceleration: Acceleration::None, polish: false, continuation: false, ..Default::default() };
    for n in [3, 6, 12] {
        let p = random_problem(&mut rng, n, 0.6, 0.02, Q);
        let mut last = f64::NEG_INFINITY;
        solve_qpot_observed(&p, &cfg, |info| {
            assert!(info.dual_value >= last, "iteration {}: {} < {last}", info.iteration, info.dual_value);
            last = info.dual_value;
        })
        .unwrap();
    }
}

#[test]
fn scaling_cost_and_epsilon_together_leaves_plan_unchanged() {
    let mut rng = rng(3);
    for _ in 0..5 {
        let p = random_problem(&mut rng, 10, 0.7, 0.01, Q);
        let (plan, _) = solve_qpot(&p, &SolverConfig::default()).unwrap();
        for alpha in [0.1, 7.0] {
            let scaled = PotProblem::new(
                p.r().clone(),
                p.c().clone(),
                p.cost().scaled(alpha),
                p.mass(),
                alpha * p.epsilon(),
                Q,
            )
            .unwrap();
            let (splan, _) = solve_qpot(&scaled, &SolverConfig::default()).unwrap();
            assert!(splan.max_abs_diff(&plan) < 1e-8, "alpha {alpha}: {}", splan.max_abs_diff(&plan));
        }
    }
}

#[test]
fn support_is_where_reduced_cost_is_positive() {
    let mut rng = rng(17);
    for (n, eps) in [(8, 0.1), (20, 1e-3), (40, 1e-5)] {
        let p = random_problem(&mut rng, n, 0.8, eps, Q);
        let (plan, cert) = solve_qpot(&p, &SolverConfig::default()).unwrap();
        assert!(plan.converged);
        for i in 0..n {
            for j in 0..n {
                let z = cert.reduced_cost(&p, i, j);
                if plan.get(i, j) > 0.0 {
                    assert!(z > -1e-9, "({i},{j}) positive with reduced cost {z}");
                } else {
                    assert!(z <= 1e-9, "({i},{j}) zero with reduced cost {z}");
                }
            }
        }
    }
}

#[test]
fn converged_plans_are_feasible() {
    let mut rng = rng(4);
    for (n, eps) in [(5, 0.5), (30, 1e-2), (60, 1e-4), (100, 1e-6)] {
        let p = random_problem(&mut rng, n, 0.7, eps, Q);
        let (plan, cert) = solve_qpot(&p, &SolverConfig::default()).unwrap();
        assert!(plan.converged);
        assert!(cert.kkt_residual <= 1e-9);
        let rep = check_feasibility(&p, &plan, 0.0);
        assert!(rep.max_violation() <= 1e-9 * p.mass().max(1.0), "{rep:?}");
        assert!((plan.total() - p.mass()).abs() <= 1e-12 * p.mass().max(1.0));
    }
}

#[test]
fn mass_projection_examples() {
    let p = problem(&[1.0, 1.0], &[1.0, 1.0], &[0.0, 1.0, 1.0, 0.0], 0.5, 0.1, Q);
    let double = TransportPlan::from_entries(2, vec![0.4, 0.1, 0.2, 0.3]).unwrap();
    let out = mass_projection(&double, &p).unwrap();
    for (a, b) in out.entries().iter().zip(double.entries()) {
        assert!((a - b / 2.0).abs() < 1e-15);
    }
    let exact = TransportPlan::from_entries(2, vec![0.2, 0.05, 0.1, 0.15]).unwrap();
    assert_eq!(mass_projection(&exact, &p).unwrap().entries(), exact.entries());
    assert!(matches!(
        mass_projection(&TransportPlan::zeros(2), &p),
        Err(PotError::DegeneratePlan { .. })
    ));
}

#[test]
fn loose_iterate_is_repaired_by_projection() {
    let mut rng = rng(9);
    for _ in 0..5 {
        let p = random_problem(&mut rng, 10, 0.7, 0.05, Q);
        let cfg = SolverConfig { kkt_tolerance: 1e-6, polish: false, ..Default::default() };
        let (plan, _) = solve_qpot(&p, &cfg).unwrap();
        let rep = check_feasibility(&p, &plan, 0.0);
        assert!(rep.max_violation() <= 1e-9, "{rep:?}");
    }
}

#[test]
fn poisson_beta_is_sparser_than_entropic() {
    use potkit_core::data::{sample_histogram_pair, Distribution};
    let pair = sample_histogram_pair(Distribution::POISSON, Distribution::BETA, 100_000, 100, 0).unwrap();
    let pos: Vec<[f64; 1]> = pair.centers.iter().map(|&x| [x]).collect();
    let cost = cost_matrix_from_positions(&pos, &pos, true).unwrap();
    let qp = PotProblem::with_lambda(pair.source, pair.target, cost, 0.7, 1e-6, Q).unwrap();
    let ep = qp.with_regularizer(Regularizer::Entropic, 1e-6).unwrap();
    let cfg = SolverConfig::default();
    let sq = sparsity(&solve(&qp, &cfg).unwrap().plan, SPARSITY_THRESHOLD);
    let se = sparsity(&solve(&ep, &cfg).unwrap().plan, SPARSITY_THRESHOLD);
    assert!(sq > se, "{sq} vs {se}");
    assert!(sq > 0.95);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primal_recovery_is_lipschitz(
        seed in any::<u64>(),
        eps in 1e-3..1.0f64,
        delta in 1e-9..1e-2f64,
    ) {
        let mut rng = rng(seed);
        let p = random_problem(&mut rng, 4, 0.5, eps, Q);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..0.5)).collect();
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..0.5)).collect();
        let tau = rng.random_range(0.0..1.5);
        let mut bump = |x: f64| x + delta * rng.random_range(-1.0..1.0);
        let u2: Vec<f64> = u.iter().map(|&x| bump(x)).collect();
        let v2: Vec<f64> = v.iter().map(|&x| bump(x)).collect();
        let tau2 = bump(tau);
        let a = primal_from_dual(&p, &u, &v, tau).unwrap();
        let b = primal_from_dual(&p, &u2, &v2, tau2).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 3.0 * delta / eps * (1.0 + 1e-12));
    }

    #[test]
    fn transposed_problem_gives_transposed_plan(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let p = random_problem(&mut rng, 6, 0.6, 0.05, Q);
        let t = PotProblem::new(p.c().clone(), p.r().clone(), p.cost().transposed(), p.mass(), p.epsilon(), Q).unwrap();
        let (a, _) = solve_qpot(&p, &SolverConfig::default()).unwrap();
        let (b, _) = solve_qpot(&t, &SolverConfig::default()).unwrap();
        prop_assert!(a.transposed().max_abs_diff(&b) < 1e-8);
    }
}
