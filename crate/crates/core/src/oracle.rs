//! Exact reference solutions for tiny problems by active-set enumeration.
//!
//! For the quadratic problem the plan is `X = max(0, (tau - C - u - v) / eps)`.
//! Fixing which entries vanish and which marginal constraints are tight turns
//! the optimality conditions into a square linear system in `(u, v, tau)`;
//! a pattern is accepted when its solution satisfies every KKT condition.
//!
//! Only supports compatible with the sign structure of the reduced costs are
//! generated: outside the tight rows and columns the duals vanish, so there
//! the support is a cost threshold, and a tight row sees a threshold on its
//! non-tight columns (likewise for tight columns). Entries in tight rows and
//! tight columns are enumerated exhaustively. Every optimal dual that is a
//! vertex of the dual solution set is reached this way.
//!
//! The entropic oracle has no zero entries; it enumerates tight rows and
//! columns and solves the smooth stationarity system by damped Newton.

use rayon::prelude::*;

use crate::error::{PotError, Result};
use crate::numeric::{log_sum_exp, solve_dense, KahanSum};
use crate::problem::{objective_qpot, PotProblem, Regularizer, TransportPlan};
use crate::qpot::{dual_value, DualCertificate};
use crate::reduced::Reduced;

/// Largest problem size the oracles accept.
pub const ORACLE_MAX_N: usize = 4;

const PIVOT_TOLERANCE: f64 = 1e-12;
const ACCEPT_TOLERANCE: f64 = 1e-10;
const NEWTON_TOLERANCE: f64 = 1e-12;

/// Zero entries, tight rows and tight columns of a candidate solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSetPattern {
    n: usize,
    zero: Vec<bool>,
    tight_rows: Vec<bool>,
    tight_cols: Vec<bool>,
}

impl ActiveSetPattern {
    pub fn new(n: usize, zero_entries: &[(usize, usize)], tight_rows: &[usize], tight_cols: &[usize]) -> Result<Self> {
        let out_of_range = zero_entries.iter().any(|&(i, j)| i >= n || j >= n)
            || tight_rows.iter().chain(tight_cols).any(|&k| k >= n);
        if out_of_range {
            return Err(PotError::Shape(format!("pattern index outside 0..{n}")));
        }
        let mut zero = vec![false; n * n];
        for &(i, j) in zero_entries {
            zero[i * n + j] = true;
        }
        let mut rows = vec![false; n];
        let mut cols = vec![false; n];
        tight_rows.iter().for_each(|&i| rows[i] = true);
        tight_cols.iter().for_each(|&j| cols[j] = true);
        Ok(Self { n, zero, tight_rows: rows, tight_cols: cols })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self, i: usize, j: usize) -> bool {
        self.zero[i * self.n + j]
    }

    pub fn is_tight_row(&self, i: usize) -> bool {
        self.tight_rows[i]
    }

    pub fn is_tight_col(&self, j: usize) -> bool {
        self.tight_cols[j]
    }

    pub fn zero_entries(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        (0..n * n).filter(|&k| self.zero[k]).map(|k| (k / n, k % n)).collect()
    }

    pub fn tight_rows(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.tight_rows[i]).collect()
    }

    pub fn tight_cols(&self) -> Vec<usize> {
        (0..self.n).filter(|&j| self.tight_cols[j]).collect()
    }

    /// Unknowns left after eliminating the plan: one per tight row and
    /// column plus `tau`.
    pub fn system_size(&self) -> usize {
        self.tight_rows.iter().chain(&self.tight_cols).filter(|&&t| t).count() + 1
    }
}

/// An accepted pattern with its plan and multipliers.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub plan: TransportPlan,
    pub certificate: DualCertificate,
    pub pattern: ActiveSetPattern,
}

fn check_size(problem: &PotProblem) -> Result<()> {
    if problem.n() > ORACLE_MAX_N {
        return Err(PotError::Parameter(format!(
            "oracle supports n <= {ORACLE_MAX_N}, got n = {}",
            problem.n()
        )));
    }
    Ok(())
}

fn require(problem: &PotProblem, reg: Regularizer) -> Result<()> {
    if problem.regularizer() != reg {
        return Err(PotError::Parameter(format!(
            "{reg} oracle called on a {} problem",
            problem.regularizer()
        )));
    }
    Ok(())
}

/// Tight row and column masks over the reduced problem, fewest tight
/// constraints first. This order defines pattern precedence.
fn tight_sets(nr: usize, nc: usize) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = (0..1u32 << nr).flat_map(|rm| (0..1u32 << nc).map(move |km| (rm, km))).collect();
    out.sort_by_key(|&(rm, km)| (rm.count_ones() + km.count_ones(), rm, km));
    out
}

fn bit(mask: u32, k: usize) -> bool {
    mask >> k & 1 == 1
}

/// Candidate duals of the reduced problem.
struct Duals {
    u: Vec<f64>,
    v: Vec<f64>,
    tau: f64,
}

/// Solves the KKT system of one quadratic pattern on the reduced problem and
/// returns the duals if every optimality condition holds.
fn solve_quadratic_pattern(p: &Reduced, support: &[bool], rm: u32, km: u32) -> Option<Duals> {
    let (nr, nc) = (p.nr(), p.nc());
    let eps = p.eps;
    let mut index_u = [usize::MAX; ORACLE_MAX_N];
    let mut index_v = [usize::MAX; ORACLE_MAX_N];
    let mut m = 0;
    for (a, slot) in index_u[..nr].iter_mut().enumerate() {
        if bit(rm, a) {
            *slot = m;
            m += 1;
        }
    }
    for (b, slot) in index_v[..nc].iter_mut().enumerate() {
        if bit(km, b) {
            *slot = m;
            m += 1;
        }
    }
    let t = m;
    let k = m + 1;
    let mut mat = [0.0f64; 81];
    let mut rhs = [0.0f64; 9];
    let mat = &mut mat[..k * k];
    let rhs = &mut rhs[..k];
    for a in 0..nr {
        for b in 0..nc {
            if !support[a * nc + b] {
                continue;
            }
            let cost = p.cost[a * nc + b];
            // Each touched equation gains the linear form tau - u_a - v_b.
            for eq in [index_u[a], index_v[b], t] {
                if eq == usize::MAX {
                    continue;
                }
                mat[eq * k + t] += 1.0;
                if index_u[a] != usize::MAX {
                    mat[eq * k + index_u[a]] -= 1.0;
                }
                if index_v[b] != usize::MAX {
                    mat[eq * k + index_v[b]] -= 1.0;
                }
                rhs[eq] += cost;
            }
        }
    }
    for a in 0..nr {
        if index_u[a] != usize::MAX {
            rhs[index_u[a]] += eps * p.r[a];
        }
    }
    for b in 0..nc {
        if index_v[b] != usize::MAX {
            rhs[index_v[b]] += eps * p.c[b];
        }
    }
    rhs[t] += eps * p.mass;
    solve_dense(mat, rhs, k, PIVOT_TOLERANCE)?;

    let mut u = [0.0; ORACLE_MAX_N];
    let mut v = [0.0; ORACLE_MAX_N];
    for a in 0..nr {
        if index_u[a] != usize::MAX {
            u[a] = rhs[index_u[a]];
        }
    }
    for b in 0..nc {
        if index_v[b] != usize::MAX {
            v[b] = rhs[index_v[b]];
        }
    }
    let tau = rhs[t];
    if u.iter().chain(&v).any(|&x| x < -ACCEPT_TOLERANCE) || !tau.is_finite() {
        return None;
    }
    let mut rows = [0.0; ORACLE_MAX_N];
    let mut cols = [0.0; ORACLE_MAX_N];
    let mut total = 0.0;
    for a in 0..nr {
        for b in 0..nc {
            let z = tau - p.cost[a * nc + b] - u[a] - v[b];
            if support[a * nc + b] {
                let x = z / eps;
                if x < -ACCEPT_TOLERANCE {
                    return None;
                }
                rows[a] += x;
                cols[b] += x;
                total += x;
            } else if z > ACCEPT_TOLERANCE {
                return None;
            }
        }
    }
    let marginal_ok = |sums: &[f64], caps: &[f64], mask: u32| {
        sums.iter().zip(caps).enumerate().all(|(k, (&x, &cap))| {
            if bit(mask, k) {
                (x - cap).abs() <= ACCEPT_TOLERANCE
            } else {
                x <= cap + ACCEPT_TOLERANCE
            }
        })
    };
    if !marginal_ok(&rows[..nr], &p.r, rm) || !marginal_ok(&cols[..nc], &p.c, km) || (total - p.mass).abs() > ACCEPT_TOLERANCE {
        return None;
    }
    Some(Duals { u: u[..nr].to_vec(), v: v[..nc].to_vec(), tau })
}

/// Supports compatible with tight sets `(rm, km)`, in enumeration order.
/// Calls `visit` until it returns `Some`.
fn for_each_support<T>(p: &Reduced, rm: u32, km: u32, mut visit: impl FnMut(&[bool]) -> Option<T>) -> Option<T> {
    let (nr, nc) = (p.nr(), p.nc());
    let cost = |a: usize, b: usize| p.cost[a * nc + b];
    let by_cost = |list: &mut Vec<(usize, usize)>| {
        list.sort_by(|x, y| cost(x.0, x.1).total_cmp(&cost(y.0, y.1)).then(x.cmp(y)));
    };
    let loose_rows: Vec<usize> = (0..nr).filter(|&a| !bit(rm, a)).collect();
    let loose_cols: Vec<usize> = (0..nc).filter(|&b| !bit(km, b)).collect();
    let tight_rows: Vec<usize> = (0..nr).filter(|&a| bit(rm, a)).collect();
    let tight_cols: Vec<usize> = (0..nc).filter(|&b| bit(km, b)).collect();

    // Threshold groups: the support of each group is a prefix of its list.
    let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut free_block: Vec<(usize, usize)> =
        loose_rows.iter().flat_map(|&a| loose_cols.iter().map(move |&b| (a, b))).collect();
    by_cost(&mut free_block);
    groups.push(free_block);
    for &a in &tight_rows {
        let mut g: Vec<(usize, usize)> = loose_cols.iter().map(|&b| (a, b)).collect();
        by_cost(&mut g);
        groups.push(g);
    }
    for &b in &tight_cols {
        let mut g: Vec<(usize, usize)> = loose_rows.iter().map(|&a| (a, b)).collect();
        by_cost(&mut g);
        groups.push(g);
    }
    let corner: Vec<(usize, usize)> =
        tight_rows.iter().flat_map(|&a| tight_cols.iter().map(move |&b| (a, b))).collect();

    let mut radix: Vec<usize> = groups.iter().map(|g| g.len() + 1).collect();
    radix.push(1usize << corner.len());
    let mut digits = vec![0usize; radix.len()];
    let mut support = vec![false; nr * nc];
    loop {
        support.iter_mut().for_each(|s| *s = false);
        for (g, &len) in groups.iter().zip(&digits) {
            for &(a, b) in &g[..len] {
                support[a * nc + b] = true;
            }
        }
        let corner_bits = digits[groups.len()];
        for (k, &(a, b)) in corner.iter().enumerate() {
            if corner_bits >> k & 1 == 1 {
                support[a * nc + b] = true;
            }
        }
        if let Some(found) = visit(&support) {
            return Some(found);
        }
        // Mixed-radix increment, last digit fastest.
        let mut pos = radix.len();
        loop {
            if pos == 0 {
                return None;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < radix[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn assemble_quadratic(problem: &PotProblem, p: &Reduced, support: &[bool], rm: u32, km: u32, d: &Duals) -> Result<OracleSolution> {
    let n = problem.n();
    let (nr, nc) = (p.nr(), p.nc());
    let mut block = vec![0.0; nr * nc];
    for a in 0..nr {
        for b in 0..nc {
            if support[a * nc + b] {
                block[a * nc + b] = ((d.tau - p.cost[a * nc + b] - d.u[a] - d.v[b]) / p.eps).max(0.0);
            }
        }
    }
    let plan = TransportPlan::from_raw(n, p.embed(&block), 0, true);
    let u: Vec<f64> = d.u.iter().map(|x| x.max(0.0)).collect();
    let v: Vec<f64> = d.v.iter().map(|x| x.max(0.0)).collect();
    let (u, v) = p.embed_duals(problem, &u, &v, d.tau);

    let mut zero = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let kept = match (p.rows.binary_search(&i), p.cols.binary_search(&j)) {
                (Ok(a), Ok(b)) => support[a * nc + b],
                _ => false,
            };
            if !kept {
                zero.push((i, j));
            }
        }
    }
    let tight_rows: Vec<usize> = (0..nr).filter(|&a| bit(rm, a)).map(|a| p.rows[a]).collect();
    let tight_cols: Vec<usize> = (0..nc).filter(|&b| bit(km, b)).map(|b| p.cols[b]).collect();
    let pattern = ActiveSetPattern::new(n, &zero, &tight_rows, &tight_cols)?;

    let primal_value = objective_qpot(problem, &plan)?;
    let dual = dual_value(problem, &u, &v, d.tau)?;
    let certificate = DualCertificate {
        kkt_residual: kkt_residual(problem, &plan, &u, &v, d.tau),
        u,
        v,
        tau: d.tau,
        dual_value: dual,
        primal_value,
    };
    Ok(OracleSolution { plan, certificate, pattern })
}

fn kkt_residual(problem: &PotProblem, plan: &TransportPlan, u: &[f64], v: &[f64], tau: f64) -> f64 {
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let mut res = (plan.total() - problem.mass()).abs();
    for ((x, r), u) in rows.iter().zip(problem.r().values()).zip(u) {
        res = res.max(x - r).max(u * (r - x).abs());
    }
    for ((x, c), v) in cols.iter().zip(problem.c().values()).zip(v) {
        res = res.max(x - c).max(v * (c - x).abs());
    }
    let n = problem.n();
    let eps = problem.epsilon();
    for i in 0..n {
        for j in 0..n {
            let target = ((tau - problem.cost().get(i, j) - u[i] - v[j]) / eps).max(0.0);
            res = res.max((plan.get(i, j) - target).abs());
        }
    }
    res
}

fn zero_mass_solution(problem: &PotProblem) -> Result<OracleSolution> {
    let n = problem.n();
    let tau = problem.cost().entries().iter().copied().fold(f64::INFINITY, f64::min);
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let certificate = DualCertificate {
        u: vec![0.0; n],
        v: vec![0.0; n],
        tau,
        dual_value: 0.0,
        primal_value: 0.0,
        kkt_residual: 0.0,
    };
    Ok(OracleSolution {
        plan: TransportPlan::zeros(n),
        certificate,
        pattern: ActiveSetPattern::new(n, &all, &[], &[])?,
    })
}

/// Exact solution of a quadratic problem with `n <= 4`. Among all patterns
/// passing the KKT checks the first in enumeration order is returned.
pub fn oracle_qpot(problem: &PotProblem) -> Result<(TransportPlan, DualCertificate)> {
    let sol = oracle_qpot_solution(problem)?;
    Ok((sol.plan, sol.certificate))
}

/// [`oracle_qpot`] together with the accepted pattern.
pub fn oracle_qpot_solution(problem: &PotProblem) -> Result<OracleSolution> {
    require(problem, Regularizer::Quadratic)?;
    check_size(problem)?;
    let p = Reduced::new(problem);
    if problem.mass() == 0.0 || p.nr() == 0 || p.nc() == 0 {
        return zero_mass_solution(problem);
    }
    let found = tight_sets(p.nr(), p.nc()).into_par_iter().find_map_first(|(rm, km)| {
        for_each_support(&p, rm, km, |support| {
            solve_quadratic_pattern(&p, support, rm, km).map(|d| (support.to_vec(), rm, km, d))
        })
    });
    let Some((support, rm, km, d)) = found else {
        return Err(PotError::Oracle("no active-set pattern satisfies the KKT conditions".into()));
    };
    assemble_quadratic(problem, &p, &support, rm, km, &d)
}

/// Every accepted pattern, in enumeration order. The plan is unique, so all
/// returned plans agree up to round-off.
pub fn oracle_qpot_all(problem: &PotProblem) -> Result<Vec<OracleSolution>> {
    require(problem, Regularizer::Quadratic)?;
    check_size(problem)?;
    let p = Reduced::new(problem);
    if problem.mass() == 0.0 || p.nr() == 0 || p.nc() == 0 {
        return Ok(vec![zero_mass_solution(problem)?]);
    }
    let accepted: Vec<(Vec<bool>, u32, u32, Duals)> = tight_sets(p.nr(), p.nc())
        .into_par_iter()
        .flat_map_iter(|(rm, km)| {
            let mut hits = Vec::new();
            for_each_support::<()>(&p, rm, km, |support| {
                if let Some(d) = solve_quadratic_pattern(&p, support, rm, km) {
                    hits.push((support.to_vec(), rm, km, d));
                }
                None
            });
            hits
        })
        .collect();
    accepted
        .iter()
        .map(|(support, rm, km, d)| assemble_quadratic(problem, &p, support, *rm, *km, d))
        .collect()
}

/// Checks one explicit pattern of a quadratic problem. Returns `None` when
/// its KKT system is singular or its solution violates an optimality
/// condition.
pub fn solve_pattern(problem: &PotProblem, pattern: &ActiveSetPattern) -> Result<Option<OracleSolution>> {
    require(problem, Regularizer::Quadratic)?;
    check_size(problem)?;
    if pattern.n() != problem.n() {
        return Err(PotError::Shape(format!("pattern is for n = {}, problem has n = {}", pattern.n(), problem.n())));
    }
    let p = Reduced::new(problem);
    if problem.mass() == 0.0 || p.nr() == 0 || p.nc() == 0 {
        return Ok(Some(zero_mass_solution(problem)?));
    }
    // Dropped rows and columns carry no mass whatever the pattern says.
    let nc = p.nc();
    let mut support = vec![false; p.nr() * nc];
    for (a, &i) in p.rows.iter().enumerate() {
        for (b, &j) in p.cols.iter().enumerate() {
            support[a * nc + b] = !pattern.is_zero(i, j);
        }
    }
    let rm = p.rows.iter().enumerate().filter(|(_, &i)| pattern.is_tight_row(i)).fold(0u32, |m, (a, _)| m | 1 << a);
    let km = p.cols.iter().enumerate().filter(|(_, &j)| pattern.is_tight_col(j)).fold(0u32, |m, (b, _)| m | 1 << b);
    match solve_quadratic_pattern(&p, &support, rm, km) {
        Some(d) => Ok(Some(assemble_quadratic(problem, &p, &support, rm, km, &d)?)),
        None => Ok(None),
    }
}

/// Plan of the entropic problem at duals `y = (u_R, v_K, tau)`, as logs.
fn entropic_log_plan(p: &Reduced, index_u: &[usize], index_v: &[usize], y: &[f64]) -> Vec<f64> {
    let (nr, nc) = (p.nr(), p.nc());
    let t = y.len() - 1;
    let scale = 2.0 / p.eps;
    let mut out = Vec::with_capacity(nr * nc);
    for a in 0..nr {
        let u = if index_u[a] == usize::MAX { 0.0 } else { y[index_u[a]] };
        for b in 0..nc {
            let v = if index_v[b] == usize::MAX { 0.0 } else { y[index_v[b]] };
            out.push(scale * (y[t] - p.cost[a * nc + b] - u - v));
        }
    }
    out
}

/// Maximizes the entropic dual restricted to tight sets `(rm, km)` and
/// returns the plan block if the KKT conditions hold at the maximizer.
fn solve_entropic_pattern(p: &Reduced, rm: u32, km: u32) -> Option<Vec<f64>> {
    let (nr, nc) = (p.nr(), p.nc());
    let eps = p.eps;
    let mut index_u = vec![usize::MAX; nr];
    let mut index_v = vec![usize::MAX; nc];
    let mut m = 0;
    for (a, slot) in index_u.iter_mut().enumerate() {
        if bit(rm, a) {
            *slot = m;
            m += 1;
        }
    }
    for (b, slot) in index_v.iter_mut().enumerate() {
        if bit(km, b) {
            *slot = m;
            m += 1;
        }
    }
    let t = m;
    let k = m + 1;

    // Dual value, gradient and plan at y; None once the plan overflows.
    let eval = |y: &[f64]| -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let logs = entropic_log_plan(p, &index_u, &index_v, y);
        if logs.iter().any(|&l| l > 700.0) {
            return None;
        }
        let x: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let mut grad = vec![0.0; k];
        let mut total = KahanSum::new();
        for a in 0..nr {
            for b in 0..nc {
                let xv = x[a * nc + b];
                total.add(xv);
                if index_u[a] != usize::MAX {
                    grad[index_u[a]] += xv;
                }
                if index_v[b] != usize::MAX {
                    grad[index_v[b]] += xv;
                }
            }
        }
        let mut value = KahanSum::new();
        value.add(-0.5 * eps * total.value());
        for a in 0..nr {
            if index_u[a] != usize::MAX {
                grad[index_u[a]] -= p.r[a];
                value.add(-y[index_u[a]] * p.r[a]);
            }
        }
        for b in 0..nc {
            if index_v[b] != usize::MAX {
                grad[index_v[b]] -= p.c[b];
                value.add(-y[index_v[b]] * p.c[b]);
            }
        }
        grad[t] = p.mass - total.value();
        value.add(y[t] * p.mass);
        Some((value.value(), grad, x))
    };

    let lse = log_sum_exp(&p.cost.iter().map(|&c| -2.0 * c / eps).collect::<Vec<_>>());
    let mut y = vec![0.0; k];
    y[t] = 0.5 * eps * (p.mass.ln() - lse);
    let (mut value, mut grad, mut x) = eval(&y)?;
    let mut converged = false;
    for _ in 0..500 {
        if grad.iter().all(|g| g.abs() <= NEWTON_TOLERANCE) {
            converged = true;
            break;
        }
        // Negated Hessian: (2/eps) sum_ij X_ij a_ij a_ijᵀ with a = e_tau - e_u - e_v.
        let mut h = vec![0.0; k * k];
        for a in 0..nr {
            for b in 0..nc {
                let w = 2.0 / eps * x[a * nc + b];
                let mut coef = [(t, 1.0), (usize::MAX, -1.0), (usize::MAX, -1.0)];
                coef[1].0 = index_u[a];
                coef[2].0 = index_v[b];
                for &(i, ci) in &coef {
                    if i == usize::MAX {
                        continue;
                    }
                    for &(j, cj) in &coef {
                        if j != usize::MAX {
                            h[i * k + j] += w * ci * cj;
                        }
                    }
                }
            }
        }
        // A small shift keeps the step defined where some entries underflow.
        let hmax = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..k {
            h[i * k + i] += 1e-9 * hmax;
        }
        let mut d = grad.clone();
        solve_dense(&mut h, &mut d, k, 0.0)?;
        let slope: f64 = d.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            if let Some((cv, cg, cx)) = eval(&cand) {
                let gmax = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                // Near the optimum the value stops resolving progress; a full
                // step that halves the gradient is taken instead.
                if cv >= value + 1e-4 * step * slope || (step == 1.0 && gmax(&cg) <= 0.5 * gmax(&grad)) {
                    y = cand;
                    value = cv;
                    grad = cg;
                    x = cx;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !converged && !grad.iter().all(|g| g.abs() <= NEWTON_TOLERANCE) {
        return None;
    }
    if y[..t].iter().any(|&d| d < -ACCEPT_TOLERANCE) {
        return None;
    }
    for a in 0..nr {
        if index_u[a] == usize::MAX {
            let row: f64 = x[a * nc..(a + 1) * nc].iter().sum();
            if row > p.r[a] + ACCEPT_TOLERANCE {
                return None;
            }
        }
    }
    for b in 0..nc {
        if index_v[b] == usize::MAX {
            let col: f64 = (0..nr).map(|a| x[a * nc + b]).sum();
            if col > p.c[b] + ACCEPT_TOLERANCE {
                return None;
            }
        }
    }
    Some(x)
}

/// Exact solution of an entropic problem with `n <= 4`.
pub fn oracle_epot(problem: &PotProblem) -> Result<TransportPlan> {
    require(problem, Regularizer::Entropic)?;
    check_size(problem)?;
    let n = problem.n();
    let p = Reduced::new(problem);
    if problem.mass() == 0.0 || p.nr() == 0 || p.nc() == 0 {
        return Ok(TransportPlan::zeros(n));
    }
    let block = tight_sets(p.nr(), p.nc())
        .into_par_iter()
        .find_map_first(|(rm, km)| solve_entropic_pattern(&p, rm, km))
        .ok_or_else(|| PotError::Oracle("damped Newton failed on every tight-set pattern".into()))?;
    Ok(TransportPlan::from_raw(n, p.embed(&block), 0, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{CostMatrix, MassVector};

    fn problem(r: &[f64], c: &[f64], cost: &[f64], s: f64, eps: f64, reg: Regularizer) -> PotProblem {
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

    #[test]
    fn single_entry_forced_by_mass() {
        let p = problem(&[1.0], &[1.0], &[0.3], 1.0, 2.0, Regularizer::Quadratic);
        let (plan, cert) = oracle_qpot(&p).unwrap();
        assert!((plan.get(0, 0) - 1.0).abs() < 1e-14);
        let expected_tau = 0.3 + 2.0 * 1.0 + cert.u[0] + cert.v[0];
        assert!((cert.tau - expected_tau).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_gives_zero_plan() {
        let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 0.0, 0.1, Regularizer::Quadratic);
        let (plan, _) = oracle_qpot(&p).unwrap();
        assert!(plan.entries().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn diagonal_instance_is_unique() {
        let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 1.0, 0.1, Regularizer::Quadratic);
        let all = oracle_qpot_all(&p).unwrap();
        assert!(!all.is_empty());
        for sol in &all {
            for (x, e) in sol.plan.entries().iter().zip([0.5, 0.0, 0.0, 0.5]) {
                assert!((x - e).abs() < 1e-9);
            }
        }
        let diag = ActiveSetPattern::new(2, &[(0, 1), (1, 0)], &[0, 1], &[]).unwrap();
        // Rows and the mass equation are dependent here; the pattern with one
        // tight row less carries the same plan.
        assert!(solve_pattern(&p, &diag).unwrap().is_none());
        let reduced = ActiveSetPattern::new(2, &[(0, 1), (1, 0)], &[0], &[]).unwrap();
        assert!(solve_pattern(&p, &reduced).unwrap().is_some());
    }

    #[test]
    fn rejects_large_problems() {
        let n = 5;
        let r = vec![0.2; n];
        let p = problem(&r, &r, &vec![0.5; n * n], 0.5, 0.1, Regularizer::Quadratic);
        assert!(matches!(oracle_qpot(&p), Err(PotError::Parameter(_))));
    }

    #[test]
    fn entropic_single_entry() {
        let p = problem(&[1.0], &[1.0], &[0.3], 1.0, 0.5, Regularizer::Entropic);
        let plan = oracle_epot(&p).unwrap();
        assert!((plan.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropic_symmetric_instance() {
        let p = problem(&[0.5, 0.5], &[0.5, 0.5], &[0.0, 1.0, 1.0, 0.0], 1.0, 0.5, Regularizer::Entropic);
        let plan = oracle_epot(&p).unwrap();
        assert!((plan.get(0, 0) - plan.get(1, 1)).abs() < 1e-12);
        assert!((plan.get(0, 1) - plan.get(1, 0)).abs() < 1e-12);
        assert!((plan.total() - 1.0).abs() < 1e-12);
    }
}
