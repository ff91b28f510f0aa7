//! Fixed inputs for the solver benchmarks in `benches/`.

use potkit_core::data::{sample_histogram_pair, seeded_rng, Distribution};
use potkit_core::{cost_matrix_from_positions, CostMatrix, MassVector, PotProblem, Regularizer};
use rand::Rng;

/// Gamma vs mixed Gaussian, whose histograms have few empty bins.
pub fn dense_toy_problem(bins: usize, lambda: f64, eps: f64, reg: Regularizer) -> PotProblem {
    let pair = sample_histogram_pair(Distribution::GAMMA, Distribution::MIXED_GAUSSIAN, 100_000, bins, 0)
        .expect("valid toy parameters");
    let pos: Vec<[f64; 1]> = pair.centers.iter().map(|&x| [x]).collect();
    let cost = cost_matrix_from_positions(&pos, &pos, true).expect("matching grids");
    PotProblem::with_lambda(pair.source, pair.target, cost, lambda, eps, reg).expect("valid problem")
}

/// A small instance with uniform random marginals and cost.
pub fn small_problem(n: usize, lambda: f64, eps: f64, reg: Regularizer, seed: u64) -> PotProblem {
    let mut rng = seeded_rng(seed);
    let mut mass = || {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        MassVector::new(raw.into_iter().map(|x| x / total).collect()).expect("positive masses")
    };
    let (r, c) = (mass(), mass());
    let cost = CostMatrix::new(n, (0..n * n).map(|_| rng.random::<f64>()).collect()).expect("finite costs");
    PotProblem::with_lambda(r, c, cost, lambda, eps, reg).expect("valid problem")
}
