#![allow(dead_code)]

use potkit_core::data::{seeded_rng, SeededRng};
use potkit_core::{CostMatrix, MassVector, PotProblem, Regularizer};
use rand::Rng;

pub fn rng(seed: u64) -> SeededRng {
    seeded_rng(seed)
}

/// Uniform marginals rescaled to unit mass and a uniform cost in [0, 1].
pub fn random_problem(rng: &mut SeededRng, n: usize, lambda: f64, eps: f64, reg: Regularizer) -> PotProblem {
    let mass = |rng: &mut SeededRng| {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        MassVector::new(raw.iter().map(|x| x / total).collect()).unwrap()
    };
    let r = mass(rng);
    let c = mass(rng);
    let cost = CostMatrix::new(n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    PotProblem::with_lambda(r, c, cost, lambda, eps, reg).unwrap()
}

pub fn problem(r: &[f64], c: &[f64], cost: &[f64], s: f64, eps: f64, reg: Regularizer) -> PotProblem {
    let n = r.len();
    PotProblem::new(
        MassVector::new(r.to_vec()).unwrap(),
        MassVector::new(c.to_vec()).unwrap(),
        CostMatrix::new(n, cost.to_vec()).unwrap(),
        s,
        eps,
        reg,
    )
    .unwrap()
}
