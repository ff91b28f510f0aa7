//! Problem definitions shared by the solvers and pipelines: histograms, cost
//! matrices, the partial transport problem, plans, and the metrics computed
//! on them.

use crate::error::{PotError, Result};
use crate::numeric::{sum_compensated, KahanSum};

/// Default threshold below which a plan entry counts as zero.
pub const SPARSITY_THRESHOLD: f64 = 1e-10;

/// Nonnegative histogram over `n` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    values: Vec<f64>,
}

impl MassVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(PotError::Shape("mass vector must have at least one bin".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(PotError::Domain(format!("mass vector entry {i} is {v}; entries must be finite and >= 0")));
        }
        Ok(Self { values })
    }

    /// Uniform histogram with the given total mass.
    pub fn uniform(n: usize, total: f64) -> Result<Self> {
        Self::new(vec![total / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// ‖v‖₁ (compensated).
    pub fn total(&self) -> f64 {
        sum_compensated(&self.values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Square nonnegative cost matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
    normalized: bool,
}

impl CostMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(PotError::Shape(format!("cost matrix needs {n}x{n} entries, got {}", entries.len())));
        }
        if let Some(v) = entries.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(PotError::Domain(format!("cost entry {v} is not a finite nonnegative number")));
        }
        Ok(Self { n, entries, normalized: false })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        Self::new(n, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Divides every entry by the maximum so that `max = 1`. An all-zero
    /// matrix is returned unchanged (but still flagged as normalized).
    pub fn normalized(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            for e in &mut self.entries {
                *e /= m;
            }
        }
        self.normalized = true;
        self
    }

    /// Multiplies every entry by `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { n: self.n, entries: self.entries.iter().map(|e| e * alpha).collect(), normalized: false }
    }

    pub fn transposed(&self) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        Self { n, entries, normalized: self.normalized }
    }
}

/// Which regularizer the problem carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regularizer {
    Quadratic,
    Entropic,
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regularizer::Quadratic => "qpot",
            Regularizer::Entropic => "epot",
        })
    }
}

impl std::str::FromStr for Regularizer {
    type Err = PotError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpot" | "quadratic" => Ok(Regularizer::Quadratic),
            "epot" | "entropic" => Ok(Regularizer::Entropic),
            other => Err(PotError::Parameter(format!("unknown method {other:?}; expected qpot or epot"))),
        }
    }
}

/// Regularized partial transport problem: move exactly `mass` units from `r`
/// to `c` with row sums `<= r` and column sums `<= c`.
#[derive(Debug, Clone)]
pub struct PotProblem {
    r: MassVector,
    c: MassVector,
    cost: CostMatrix,
    mass: f64,
    epsilon: f64,
    regularizer: Regularizer,
}

impl PotProblem {
    pub fn new(
        r: MassVector,
        c: MassVector,
        cost: CostMatrix,
        mass: f64,
        epsilon: f64,
        regularizer: Regularizer,
    ) -> Result<Self> {
        let n = cost.n();
        if r.len() != n || c.len() != n {
            return Err(PotError::Shape(format!(
                "r has {} bins, c has {} bins, cost is {n}x{n}",
                r.len(),
                c.len()
            )));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(PotError::Parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let cap = r.total().min(c.total());
        if !(mass >= 0.0) || mass > cap * (1.0 + 1e-12) {
            return Err(PotError::Parameter(format!("mass {mass} outside [0, {cap}]")));
        }
        Ok(Self { r, c, cost, mass: mass.min(cap), epsilon, regularizer })
    }

    /// Builds the problem with `s = lambda * min(‖r‖₁, ‖c‖₁)`.
    pub fn with_lambda(
        r: MassVector,
        c: MassVector,
        cost: CostMatrix,
        lambda: f64,
        epsilon: f64,
        regularizer: Regularizer,
    ) -> Result<Self> {
        let s = lambda_to_mass(lambda, &r, &c)?;
        Self::new(r, c, cost, s, epsilon, regularizer)
    }

    pub fn n(&self) -> usize {
        self.cost.n()
    }

    pub fn r(&self) -> &MassVector {
        &self.r
    }

    pub fn c(&self) -> &MassVector {
        &self.c
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }

    /// Total transported mass `s`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    /// Same marginals and cost with a different regularizer and strength.
    pub fn with_regularizer(&self, regularizer: Regularizer, epsilon: f64) -> Result<Self> {
        Self::new(self.r.clone(), self.c.clone(), self.cost.clone(), self.mass, epsilon, regularizer)
    }
}

/// Converts a mass fraction `lambda ∈ [0, 1]` into the transported mass.
pub fn lambda_to_mass(lambda: f64, r: &MassVector, c: &MassVector) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PotError::Parameter(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(lambda * r.total().min(c.total()))
}

/// Square nonnegative transport plan with solver provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    entries: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl TransportPlan {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![0.0; n * n], iterations: 0, converged: true }
    }

    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(PotError::Shape(format!("plan needs {n}x{n} entries, got {}", entries.len())));
        }
        if let Some(v) = entries.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(PotError::Domain(format!("plan entry {v} is not a finite nonnegative number")));
        }
        Ok(Self { n, entries, iterations: 0, converged: true })
    }

    /// Builds a plan without validating entries. Callers guarantee nonnegativity.
    pub(crate) fn from_raw(n: usize, entries: Vec<f64>, iterations: usize, converged: bool) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        Self { n, entries, iterations, converged }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| sum_compensated(self.row(i))).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); self.n];
        for row in self.entries.chunks_exact(self.n) {
            for (a, &x) in acc.iter_mut().zip(row) {
                a.add(x);
            }
        }
        acc.into_iter().map(|a| a.value()).collect()
    }

    pub fn total(&self) -> f64 {
        sum_compensated(&self.entries)
    }

    /// Returns a copy with every entry multiplied by `alpha >= 0`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e *= alpha;
        }
        out
    }

    pub fn transposed(&self) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        Self { n, entries, iterations: self.iterations, converged: self.converged }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &TransportPlan) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Constraint violations of a plan with respect to the partial transport set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub row_violation: f64,
    pub col_violation: f64,
    pub mass_error: f64,
    pub min_entry: f64,
}

impl FeasibilityReport {
    /// Largest of the three constraint violations (negativity included).
    pub fn max_violation(&self) -> f64 {
        // Adding zero turns a -0.0 from the negated minimum into +0.0.
        self.row_violation.max(self.col_violation).max(self.mass_error).max(-self.min_entry.min(0.0)) + 0.0
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

fn check_shape(problem: &PotProblem, plan: &TransportPlan) -> Result<()> {
    if plan.n() != problem.n() {
        return Err(PotError::Shape(format!("plan is {0}x{0}, problem is {1}x{1}", plan.n(), problem.n())));
    }
    Ok(())
}

/// `⟨C, X⟩ + (ε/2)‖X‖_F²`.
pub fn objective_qpot(problem: &PotProblem, plan: &TransportPlan) -> Result<f64> {
    check_shape(problem, plan)?;
    let eps = problem.epsilon();
    let mut acc = KahanSum::new();
    for (&c, &x) in problem.cost().entries().iter().zip(plan.entries()) {
        acc.add(c * x + 0.5 * eps * x * x);
    }
    Ok(acc.value())
}

/// `⟨C, X⟩ + (ε/2) Σ (X log X − X)`, with `0 log 0 = 0`.
pub fn objective_epot(problem: &PotProblem, plan: &TransportPlan) -> Result<f64> {
    check_shape(problem, plan)?;
    let eps = problem.epsilon();
    let mut acc = KahanSum::new();
    for (&c, &x) in problem.cost().entries().iter().zip(plan.entries()) {
        if x < 0.0 {
            return Err(PotError::Domain(format!("entropic objective undefined at negative entry {x}")));
        }
        let ent = if x > 0.0 { x * x.ln() - x } else { 0.0 };
        acc.add(c * x + 0.5 * eps * ent);
    }
    Ok(acc.value())
}

/// Objective matching the problem's regularizer.
pub fn objective(problem: &PotProblem, plan: &TransportPlan) -> Result<f64> {
    match problem.regularizer() {
        Regularizer::Quadratic => objective_qpot(problem, plan),
        Regularizer::Entropic => objective_epot(problem, plan),
    }
}

/// Measures how far `plan` is from the feasible set of `problem`. Diagnostic
/// only; `_tol` is accepted for interface symmetry and the caller judges the
/// report.
pub fn check_feasibility(problem: &PotProblem, plan: &TransportPlan, _tol: f64) -> FeasibilityReport {
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let row_violation = rows
        .iter()
        .zip(problem.r().values())
        .map(|(x, r)| (x - r).max(0.0))
        .fold(0.0, f64::max);
    let col_violation = cols
        .iter()
        .zip(problem.c().values())
        .map(|(x, c)| (x - c).max(0.0))
        .fold(0.0, f64::max);
    let mass_error = (plan.total() - problem.mass()).abs();
    let min_entry = plan.entries().iter().copied().fold(f64::INFINITY, f64::min);
    FeasibilityReport { row_violation, col_violation, mass_error, min_entry }
}

/// Fraction of entries with `|x| < threshold`.
pub fn sparsity(plan: &TransportPlan, threshold: f64) -> f64 {
    let below = plan.entries().iter().filter(|x| x.abs() < threshold).count();
    below as f64 / plan.entries().len() as f64
}

/// `C[i][j] = ‖a_i − b_j‖²`, optionally divided by its maximum.
pub fn cost_matrix_from_positions<P: AsRef<[f64]>>(a: &[P], b: &[P], normalize: bool) -> Result<CostMatrix> {
    if a.len() != b.len() || a.is_empty() {
        return Err(PotError::Shape(format!("position lists have lengths {} and {}", a.len(), b.len())));
    }
    let dim = a[0].as_ref().len();
    if a.iter().chain(b).any(|p| p.as_ref().len() != dim) {
        return Err(PotError::Shape("points must share one dimension".into()));
    }
    let n = a.len();
    let cost = CostMatrix::from_fn(n, |i, j| {
        a[i].as_ref().iter().zip(b[j].as_ref()).map(|(x, y)| (x - y) * (x - y)).sum()
    })?;
    Ok(if normalize { cost.normalized() } else { cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mv(v: &[f64]) -> MassVector {
        MassVector::new(v.to_vec()).unwrap()
    }

    fn problem(cost: Vec<f64>, n: usize, s: f64, eps: f64, reg: Regularizer) -> PotProblem {
        let r = MassVector::uniform(n, 1.0).unwrap();
        let c = MassVector::uniform(n, 1.0).unwrap();
        PotProblem::new(r, c, CostMatrix::new(n, cost).unwrap(), s, eps, reg).unwrap()
    }

    #[test]
    fn lambda_to_mass_examples() {
        let u = mv(&[0.5, 0.5]);
        assert!((lambda_to_mass(0.6, &u, &u).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(lambda_to_mass(0.0, &u, &u).unwrap(), 0.0);
        let r = mv(&[0.4, 0.4]);
        let c = mv(&[0.6, 0.6]);
        assert!((lambda_to_mass(1.0, &r, &c).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(lambda_to_mass(-0.1, &r, &c), Err(PotError::Parameter(_))));
        assert!(matches!(lambda_to_mass(1.1, &r, &c), Err(PotError::Parameter(_))));
    }

    #[test]
    fn mass_vector_rejects_negative_and_empty() {
        assert!(MassVector::new(vec![]).is_err());
        assert!(MassVector::new(vec![0.1, -0.1]).is_err());
        assert!(MassVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn problem_validates_mass_and_shapes() {
        let r = mv(&[0.5, 0.5]);
        let c = mv(&[0.25, 0.25]);
        let cost = CostMatrix::new(2, vec![0.0; 4]).unwrap();
        assert!(PotProblem::new(r.clone(), c.clone(), cost.clone(), 0.6, 1.0, Regularizer::Quadratic).is_err());
        assert!(PotProblem::new(r.clone(), c.clone(), cost.clone(), 0.5, 0.0, Regularizer::Quadratic).is_err());
        let bad = CostMatrix::new(1, vec![0.0]).unwrap();
        assert!(matches!(
            PotProblem::new(r, c, bad, 0.1, 1.0, Regularizer::Quadratic),
            Err(PotError::Shape(_))
        ));
    }

    #[test]
    fn qpot_objective_examples() {
        let p = problem(vec![0.0; 4], 2, 0.0, 1.0, Regularizer::Quadratic);
        assert_eq!(objective_qpot(&p, &TransportPlan::zeros(2)).unwrap(), 0.0);

        let r = mv(&[1.0]);
        let p = PotProblem::new(r.clone(), r, CostMatrix::new(1, vec![2.0]).unwrap(), 1.0, 2.0, Regularizer::Quadratic)
            .unwrap();
        let x = TransportPlan::from_entries(1, vec![1.0]).unwrap();
        assert!((objective_qpot(&p, &x).unwrap() - 3.0).abs() < 1e-15);

        let p = problem(vec![0.0, 1.0, 1.0, 0.0], 2, 0.6, 0.1, Regularizer::Quadratic);
        let x = TransportPlan::from_entries(2, vec![0.3, 0.0, 0.0, 0.3]).unwrap();
        assert!((objective_qpot(&p, &x).unwrap() - 0.009).abs() < 1e-15);
    }

    #[test]
    fn qpot_objective_rejects_shape_mismatch() {
        let p = problem(vec![0.0; 4], 2, 0.0, 1.0, Regularizer::Quadratic);
        assert!(matches!(objective_qpot(&p, &TransportPlan::zeros(3)), Err(PotError::Shape(_))));
    }

    #[test]
    fn epot_objective_examples() {
        let p = problem(vec![0.0; 4], 2, 0.0, 1.0, Regularizer::Entropic);
        assert_eq!(objective_epot(&p, &TransportPlan::zeros(2)).unwrap(), 0.0);

        let one = mv(&[1.0]);
        let p = PotProblem::new(one.clone(), one.clone(), CostMatrix::new(1, vec![0.0]).unwrap(), 1.0, 2.0, Regularizer::Entropic)
            .unwrap();
        let x = TransportPlan::from_entries(1, vec![1.0]).unwrap();
        assert!((objective_epot(&p, &x).unwrap() + 1.0).abs() < 1e-15);

        let e = std::f64::consts::E;
        let big = mv(&[e]);
        let p = PotProblem::new(big.clone(), big, CostMatrix::new(1, vec![1.0]).unwrap(), e, 2.0, Regularizer::Entropic)
            .unwrap();
        let x = TransportPlan::from_entries(1, vec![e]).unwrap();
        assert!((objective_epot(&p, &x).unwrap() - e).abs() < 1e-14);
    }

    #[test]
    fn epot_objective_rejects_negative_entries() {
        let p = problem(vec![0.0; 4], 2, 0.0, 1.0, Regularizer::Entropic);
        let x = TransportPlan::from_raw(2, vec![0.1, -0.1, 0.0, 0.0], 0, true);
        assert!(matches!(objective_epot(&p, &x), Err(PotError::Domain(_))));
    }

    #[test]
    fn feasibility_examples() {
        let p = problem(vec![0.0; 4], 2, 0.0, 1.0, Regularizer::Quadratic);
        let rep = check_feasibility(&p, &TransportPlan::zeros(2), 0.0);
        assert_eq!(rep.max_violation(), 0.0);

        let p = problem(vec![0.0; 4], 2, 0.5, 1.0, Regularizer::Quadratic);
        let x = TransportPlan::from_entries(2, vec![0.6, 0.0, 0.0, 0.0]).unwrap();
        let rep = check_feasibility(&p, &x, 0.0);
        assert!((rep.row_violation - 0.1).abs() < 1e-15);
        assert!((rep.col_violation - 0.1).abs() < 1e-15);
        assert!((rep.mass_error - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sparsity_examples() {
        assert_eq!(sparsity(&TransportPlan::zeros(10), SPARSITY_THRESHOLD), 1.0);
        let ones = TransportPlan::from_entries(10, vec![1.0; 100]).unwrap();
        assert_eq!(sparsity(&ones, SPARSITY_THRESHOLD), 0.0);
    }

    #[test]
    fn cost_from_positions_examples() {
        let a = [[0.0], [1.0]];
        let c = cost_matrix_from_positions(&a, &a, false).unwrap();
        assert_eq!(c.entries(), &[0.0, 1.0, 1.0, 0.0]);
        let c = cost_matrix_from_positions(&a, &a, true).unwrap();
        assert_eq!(c.entries(), &[0.0, 1.0, 1.0, 0.0]);
        assert!(c.is_normalized());
        let b = [[0.0], [2.0]];
        let c = cost_matrix_from_positions(&b, &b, true).unwrap();
        assert_eq!(c.entries(), &[0.0, 1.0, 1.0, 0.0]);
        let z = [[0.0], [0.0]];
        let c = cost_matrix_from_positions(&z, &z, true).unwrap();
        assert_eq!(c.entries(), &[0.0; 4]);
        let short = [[0.0]];
        assert!(matches!(cost_matrix_from_positions(&a, &short, false), Err(PotError::Shape(_))));
    }

    fn plan_strategy(n: usize) -> impl Strategy<Value = TransportPlan> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64, 1e-14..1e-8f64], n * n)
            .prop_map(move |v| TransportPlan::from_entries(n, v).unwrap())
    }

    proptest! {
        #[test]
        fn sparsity_is_monotone_in_threshold(plan in plan_strategy(5), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(sparsity(&plan, lo) <= sparsity(&plan, hi));
        }

        #[test]
        fn qpot_objective_transpose_invariant(
            plan in plan_strategy(4),
            cost in proptest::collection::vec(0.0..1.0f64, 16),
            eps in 0.01..2.0f64,
        ) {
            let p = problem(cost, 4, 0.0, eps, Regularizer::Quadratic);
            let pt = PotProblem::new(p.r().clone(), p.c().clone(), p.cost().transposed(), 0.0, eps, Regularizer::Quadratic).unwrap();
            let a = objective_qpot(&p, &plan).unwrap();
            let b = objective_qpot(&pt, &plan.transposed()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn zero_plan_mass_error_is_s(lambda in 0.0..=1.0f64) {
            let p = problem(vec![0.5; 9], 3, lambda, 1.0, Regularizer::Quadratic);
            let rep = check_feasibility(&p, &TransportPlan::zeros(3), 0.0);
            prop_assert_eq!(rep.mass_error, p.mass());
        }

        #[test]
        fn lambda_to_mass_monotone_and_bounded(
            l1 in 0.0..=1.0f64, l2 in 0.0..=1.0f64,
            r in proptest::collection::vec(0.0..1.0f64, 4),
            c in proptest::collection::vec(0.0..1.0f64, 4),
        ) {
            let (r, c) = (mv(&r), mv(&c));
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let s_lo = lambda_to_mass(lo, &r, &c).unwrap();
            let s_hi = lambda_to_mass(hi, &r, &c).unwrap();
            prop_assert!(s_lo <= s_hi);
            prop_assert!(s_hi >= 0.0 && s_hi <= r.total().min(c.total()));
        }

        #[test]
        fn epot_objective_finite_with_zeros(plan in plan_strategy(4), eps in 1e-6..10.0f64) {
            let p = problem(vec![0.3; 16], 4, 0.0, eps, Regularizer::Entropic);
            prop_assert!(objective_epot(&p, &plan).unwrap().is_finite());
        }
    }
}
