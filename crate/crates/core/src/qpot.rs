//! Quadratic-regularized partial transport, solved through its concave dual.
//!
//! With multipliers `u >= 0` (rows), `v >= 0` (columns) and `tau` (total
//! mass), the Lagrangian is minimized in closed form by
//!
//! ```text
//! X_ij = max(0, tau - C_ij - u_i - v_j) / eps
//! ```
//!
//! and the dual function is
//!
//! ```text
//! g(u, v, tau) = -(eps/2) ||X||_F^2 - <u, r> - <v, c> + tau * s
//! ```
//!
//! which is concave and continuously differentiable with gradient
//! `(X 1 - r, X^T 1 - c, s - sum X)`. The solver runs projected gradient
//! ascent (Armijo backtracking, optional Nesterov momentum with restart) and,
//! once a support estimate exists, refines it with projected Newton steps on
//! the active pattern. Dual variables are carried in double-double precision:
//! for small `eps` a single ulp of `tau` moves the plan mass by more than the
//! convergence tolerance.

use crate::error::{PotError, Result};
use crate::ldl::SparseSym;
use crate::numeric::{two_sum, Dd, KahanSum};
use crate::problem::{check_feasibility, objective_qpot, PotProblem, Regularizer, TransportPlan};
use crate::reduced::Reduced;

/// Momentum scheme of the gradient phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acceleration {
    None,
    Nesterov,
}

/// Iteration controls shared by both solvers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Target for the KKT residual (quadratic) or marginal violation (entropic).
    pub kkt_tolerance: f64,
    pub max_iterations: usize,
    pub acceleration: Acceleration,
    /// Step contraction of the backtracking line search.
    pub backtrack_factor: f64,
    /// Armijo sufficient-increase constant.
    pub armijo_slope: f64,
    /// Enables projected Newton steps on the identified support.
    pub polish: bool,
    /// The solve stops unconverged when it makes no measurable progress
    /// within this many iterations (sweeps for the entropic solver).
    pub stall_window: usize,
    /// Solves a decreasing sequence of regularization levels, each started
    /// from the previous duals.
    pub continuation: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-9,
            max_iterations: 50_000,
            acceleration: Acceleration::Nesterov,
            backtrack_factor: 0.5,
            armijo_slope: 1e-4,
            polish: true,
            stall_window: 500,
            continuation: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tolerance > 0.0) {
            return Err(PotError::Parameter(format!("kkt_tolerance must be positive, got {}", self.kkt_tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(PotError::Parameter("max_iterations must be at least 1".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(PotError::Parameter("backtrack_factor must lie in (0, 1)".into()));
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 1.0) {
            return Err(PotError::Parameter("armijo_slope must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Dual variables together with the quantities that certify a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub tau: f64,
    pub dual_value: f64,
    pub primal_value: f64,
    pub kkt_residual: f64,
}

impl DualCertificate {
    pub fn duality_gap(&self) -> f64 {
        self.primal_value - self.dual_value
    }

    /// `tau - C_ij - u_i - v_j`: positive exactly on the support of the optimal plan.
    pub fn reduced_cost(&self, problem: &PotProblem, i: usize, j: usize) -> f64 {
        self.tau - problem.cost().get(i, j) - self.u[i] - self.v[j]
    }
}

/// Partial derivatives of the dual function.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGradient {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub tau: f64,
}

/// Kind of step that produced an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Initial,
    Gradient,
    Newton,
}

/// Snapshot handed to a solve observer after every accepted iterate.
/// Multipliers are those of the reduced problem (rows with `r_i > 0`,
/// columns with `c_j > 0`).
#[derive(Debug)]
pub struct IterateInfo<'a> {
    pub iteration: usize,
    pub step: StepKind,
    pub dual_value: f64,
    pub kkt_residual: f64,
    pub u: &'a [f64],
    pub v: &'a [f64],
    pub tau: f64,
}

fn require_quadratic(problem: &PotProblem) -> Result<()> {
    if problem.regularizer() != Regularizer::Quadratic {
        return Err(PotError::Parameter("problem is not quadratic-regularized".into()));
    }
    Ok(())
}

fn check_dual_shapes(problem: &PotProblem, u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != problem.n() || v.len() != problem.n() {
        return Err(PotError::Shape(format!(
            "duals have lengths {} and {}, problem has {} bins",
            u.len(),
            v.len(),
            problem.n()
        )));
    }
    Ok(())
}

/// Unique minimizer of the Lagrangian at the given multipliers.
pub fn primal_from_dual(problem: &PotProblem, u: &[f64], v: &[f64], tau: f64) -> Result<TransportPlan> {
    require_quadratic(problem)?;
    check_dual_shapes(problem, u, v)?;
    let n = problem.n();
    let eps = problem.epsilon();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        let row = problem.cost().row(i);
        for j in 0..n {
            let z = tau - row[j] - u[i] - v[j];
            entries.push(if z > 0.0 { z / eps } else { 0.0 });
        }
    }
    Ok(TransportPlan::from_raw(n, entries, 0, false))
}

/// Dual function `g(u, v, tau)`.
pub fn dual_value(problem: &PotProblem, u: &[f64], v: &[f64], tau: f64) -> Result<f64> {
    let x = primal_from_dual(problem, u, v, tau)?;
    let eps = problem.epsilon();
    let mut acc = KahanSum::new();
    for &e in x.entries() {
        acc.add(-0.5 * eps * e * e);
    }
    for (ui, ri) in u.iter().zip(problem.r().values()) {
        acc.add(-ui * ri);
    }
    for (vj, cj) in v.iter().zip(problem.c().values()) {
        acc.add(-vj * cj);
    }
    acc.add(tau * problem.mass());
    Ok(acc.value())
}

/// Gradient of the dual function.
pub fn dual_gradient(problem: &PotProblem, u: &[f64], v: &[f64], tau: f64) -> Result<DualGradient> {
    let x = primal_from_dual(problem, u, v, tau)?;
    let gu = x.row_sums().iter().zip(problem.r().values()).map(|(a, b)| a - b).collect();
    let gv = x.col_sums().iter().zip(problem.c().values()).map(|(a, b)| a - b).collect();
    Ok(DualGradient { u: gu, v: gv, tau: problem.mass() - x.total() })
}

/// Restores the total-mass equality: scales the plan to mass `s`, then caps
/// any row above `r_i` and any column above `c_j`; repeated for at most three
/// rounds.
pub fn mass_projection(plan: &TransportPlan, problem: &PotProblem) -> Result<TransportPlan> {
    let s = problem.mass();
    let total = plan.total();
    if total <= 0.0 {
        if s > 0.0 {
            return Err(PotError::DegeneratePlan { requested: s });
        }
        let mut zero = TransportPlan::zeros(plan.n());
        zero.iterations = plan.iterations;
        zero.converged = plan.converged;
        return Ok(zero);
    }
    let mut out = plan.clone();
    for _ in 0..3 {
        let total = out.total();
        if total > 0.0 && total != s {
            let f = s / total;
            out.entries_mut().iter_mut().for_each(|e| *e *= f);
        }
        let capped = cap_marginals(&mut out, problem.r().values(), problem.c().values());
        if !capped {
            break;
        }
    }
    top_up_mass(&mut out, problem.r().values(), problem.c().values(), s);
    Ok(out)
}

/// Covers a remaining mass deficit by scaling up the entries whose row and
/// column both have slack, as far as those slacks allow, repeating while rows
/// or columns saturate. What is left is pushed along alternating paths of
/// support entries. Zero entries stay zero.
pub(crate) fn top_up_mass(plan: &mut TransportPlan, r: &[f64], c: &[f64], s: f64) {
    let n = plan.n();
    for _ in 0..TOP_UP_ROUNDS {
        let deficit = s - plan.total();
        if !(deficit > 1e-15 * s) {
            return;
        }
        let rows = plan.row_sums();
        let cols = plan.col_sums();
        let free_r: Vec<bool> = rows.iter().zip(r).map(|(x, cap)| x < cap).collect();
        let free_c: Vec<bool> = cols.iter().zip(c).map(|(x, cap)| x < cap).collect();
        let mut row_free = vec![0.0; n];
        let mut col_free = vec![0.0; n];
        let mut free_total = 0.0;
        for i in (0..n).filter(|&i| free_r[i]) {
            for j in (0..n).filter(|&j| free_c[j]) {
                let x = plan.get(i, j);
                row_free[i] += x;
                col_free[j] += x;
                free_total += x;
            }
        }
        if free_total <= 0.0 {
            break;
        }
        let mut grow = deficit / free_total;
        for i in 0..n {
            if free_r[i] && row_free[i] > 0.0 {
                grow = grow.min((r[i] - rows[i]) / row_free[i]);
            }
            if free_c[i] && col_free[i] > 0.0 {
                grow = grow.min((c[i] - cols[i]) / col_free[i]);
            }
        }
        if !(grow > 0.0) {
            break;
        }
        let f = 1.0 + grow;
        let entries = plan.entries_mut();
        for i in (0..n).filter(|&i| free_r[i]) {
            for j in (0..n).filter(|&j| free_c[j]) {
                entries[i * n + j] *= f;
            }
        }
    }
    let mut deficit = s - plan.total();
    for _ in 0..n * n {
        if !(deficit > 0.0) {
            return;
        }
        let Some(moved) = augment_once(plan, r, c, deficit) else {
            return;
        };
        deficit -= moved;
    }
}

/// Pushes mass along one alternating path of support entries from a row
/// with slack to a column with slack: `+d` on the first entry, then `-d`,
/// `+d`, ... Inner rows and columns keep their sums, the total grows by `d`.
/// Returns the amount moved, or `None` if no such path exists.
fn augment_once(plan: &mut TransportPlan, r: &[f64], c: &[f64], deficit: f64) -> Option<f64> {
    let n = plan.n();
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let x = plan.entries();
    // BFS over rows; `col_from[j]` is the row whose entry reached column j,
    // `row_from[i]` the column whose entry was decreased to reach row i.
    let mut row_from: Vec<Option<usize>> = vec![None; n];
    let mut col_from: Vec<Option<usize>> = vec![None; n];
    let mut seen_row = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    for i in 0..n {
        if rows[i] < r[i] {
            seen_row[i] = true;
            queue.push_back(i);
        }
    }
    let mut end = None;
    'search: while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if x[i * n + j] <= 0.0 || col_from[j].is_some() {
                continue;
            }
            col_from[j] = Some(i);
            if cols[j] < c[j] {
                end = Some(j);
                break 'search;
            }
            for k in 0..n {
                if !seen_row[k] && x[k * n + j] > 0.0 {
                    seen_row[k] = true;
                    row_from[k] = Some(j);
                    queue.push_back(k);
                }
            }
        }
    }
    let end = end?;
    // Walk back to collect the path and its capacity.
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut j = end;
    let mut d = deficit.min(c[end] - cols[end]);
    loop {
        let i = col_from[j].expect("reached column has a parent");
        plus.push(i * n + j);
        match row_from[i] {
            Some(prev) => {
                minus.push(i * n + prev);
                d = d.min(x[i * n + prev]);
                j = prev;
            }
            None => {
                d = d.min(r[i] - rows[i]);
                break;
            }
        }
    }
    if !(d > 0.0) {
        return None;
    }
    let entries = plan.entries_mut();
    for k in plus {
        entries[k] += d;
    }
    for k in minus {
        entries[k] = (entries[k] - d).max(0.0);
    }
    Some(d)
}

/// Proportional growth rounds of [`top_up_mass`].
const TOP_UP_ROUNDS: usize = 20;

/// Scales down every row above its cap, then every column above its cap.
/// Returns whether any cap was active.
pub(crate) fn cap_marginals(plan: &mut TransportPlan, r: &[f64], c: &[f64]) -> bool {
    let n = plan.n();
    let mut any = false;
    let rows = plan.row_sums();
    for (i, (&sum, &cap)) in rows.iter().zip(r).enumerate() {
        if sum > cap {
            any = true;
            let f = if sum > 0.0 { cap / sum } else { 0.0 };
            plan.entries_mut()[i * n..(i + 1) * n].iter_mut().for_each(|e| *e *= f);
        }
    }
    let cols = plan.col_sums();
    let factors: Vec<Option<f64>> = cols
        .iter()
        .zip(c)
        .map(|(&sum, &cap)| if sum > cap { Some(if sum > 0.0 { cap / sum } else { 0.0 }) } else { None })
        .collect();
    if factors.iter().any(Option::is_some) {
        any = true;
        for row in plan.entries_mut().chunks_exact_mut(n) {
            for (e, f) in row.iter_mut().zip(&factors) {
                if let Some(f) = f {
                    *e *= f;
                }
            }
        }
    }
    any
}

/// Solves the quadratic-regularized problem.
pub fn solve_qpot(problem: &PotProblem, config: &SolverConfig) -> Result<(TransportPlan, DualCertificate)> {
    solve_qpot_observed(problem, config, |_| {})
}

/// [`solve_qpot`] with a callback invoked after every accepted iterate.
pub fn solve_qpot_observed(
    problem: &PotProblem,
    config: &SolverConfig,
    mut observer: impl FnMut(&IterateInfo<'_>),
) -> Result<(TransportPlan, DualCertificate)> {
    require_quadratic(problem)?;
    config.validate()?;
    let n = problem.n();
    let reduced = Reduced::new(problem);

    if problem.mass() == 0.0 || reduced.nr() == 0 || reduced.nc() == 0 {
        // Any tau below the smallest cost gives X = 0 and a zero duality gap.
        let tau = problem.cost().entries().iter().copied().fold(f64::INFINITY, f64::min);
        let cert = DualCertificate {
            u: vec![0.0; n],
            v: vec![0.0; n],
            tau,
            dual_value: 0.0,
            primal_value: 0.0,
            kkt_residual: 0.0,
        };
        return Ok((TransportPlan::zeros(n), cert));
    }

    let schedule = if config.continuation { continuation_schedule(&reduced) } else { vec![reduced.eps] };
    let sorted = SortedRows::new(&reduced);
    let mut start = None;
    let mut spent = 0;
    let last = schedule.len() - 1;
    let mut staged;
    for &eps in &schedule[..last] {
        staged = reduced.clone();
        staged.eps = eps;
        let mut solver = DualAscent::new(&staged, &sorted, config, start.take());
        let budget = config.max_iterations.saturating_sub(spent) / 2;
        let out = solver.run(&mut |_: &IterateInfo<'_>| {}, STAGE_TOLERANCE.max(config.kkt_tolerance), budget.max(1));
        spent += out.iterations;
        start = Some(solver.x);
    }
    let mut solver = DualAscent::new(&reduced, &sorted, config, start);
    let mut outcome = solver.run(&mut observer, config.kkt_tolerance, config.max_iterations.saturating_sub(spent).max(1));
    outcome.iterations += spent;
    if outcome.converged && config.polish {
        // Each marginal may overshoot by up to the tolerance, and the final
        // projection loses their sum; a few more Newton steps shrink it.
        for _ in 0..REFINE_STEPS {
            let before = outcome.residual;
            if !solver.newton_step() {
                break;
            }
            outcome.residual = solver.residual(&solver.x, &solver.eval_x);
            outcome.iterations += 1;
            if outcome.residual > 0.5 * before {
                break;
            }
        }
    }

    let x = &solver.x;
    let eval = &solver.eval_x;
    let block = solver.plan_block(x);
    let raw = TransportPlan::from_raw(n, reduced.embed(&block), outcome.iterations, outcome.converged);
    let plan = mass_projection(&raw, problem)?;

    let u_red: Vec<f64> = x.u.iter().map(|d| d.to_f64()).collect();
    let v_red: Vec<f64> = x.v.iter().map(|d| d.to_f64()).collect();
    let tau = x.tau.to_f64();
    let (u, v) = reduced.embed_duals(problem, &u_red, &v_red, tau);
    let primal_value = objective_qpot(problem, &plan)?;
    let cert = DualCertificate {
        u,
        v,
        tau,
        dual_value: eval.value,
        primal_value,
        kkt_residual: outcome.residual,
    };
    debug_assert!(check_feasibility(problem, &plan, 0.0).min_entry >= 0.0);
    Ok((plan, cert))
}

/// Residual target of the intermediate continuation stages.
const STAGE_TOLERANCE: f64 = 1e-7;

/// Newton steps tried after convergence to tighten the marginals.
const REFINE_STEPS: usize = 4;

/// Decreasing regularization levels ending at the problem's own: a factor of
/// ten apart, starting from the largest cost. Each stage starts from the duals
/// of the previous one.
fn continuation_schedule(p: &Reduced) -> Vec<f64> {
    let top = p.cost.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut eps = top;
    while eps > 10.0 * p.eps {
        out.push(eps);
        eps /= 10.0;
    }
    out.push(p.eps);
    out
}

struct Outcome {
    iterations: usize,
    converged: bool,
    residual: f64,
}

#[derive(Debug, Clone)]
struct DualPoint {
    u: Vec<Dd>,
    v: Vec<Dd>,
    tau: Dd,
}

impl DualPoint {
    /// `P(self + t * d)` with `d = (du, dv, dtau)`; `u, v` clamped at zero.
    fn step(&self, du: &[f64], dv: &[f64], dtau: f64, t: f64) -> DualPoint {
        let clamp = |x: Dd| if x.hi < 0.0 || (x.hi == 0.0 && x.lo < 0.0) { Dd::ZERO } else { x };
        DualPoint {
            u: self.u.iter().zip(du).map(|(&x, &d)| if d == 0.0 { x } else { clamp(x.add_f64(t * d)) }).collect(),
            v: self.v.iter().zip(dv).map(|(&x, &d)| if d == 0.0 { x } else { clamp(x.add_f64(t * d)) }).collect(),
            tau: self.tau.add_f64(t * dtau),
        }
    }

    /// Componentwise `self - other` rounded to double.
    fn diff(&self, other: &DualPoint) -> (Vec<f64>, Vec<f64>, f64) {
        let d = |a: &Dd, b: &Dd| (a.hi - b.hi) + (a.lo - b.lo);
        (
            self.u.iter().zip(&other.u).map(|(a, b)| d(a, b)).collect(),
            self.v.iter().zip(&other.v).map(|(a, b)| d(a, b)).collect(),
            d(&self.tau, &other.tau),
        )
    }
}

/// Dual function, gradient pieces and support of the recovered plan at a point.
#[derive(Debug, Clone, Default)]
struct Evaluation {
    value: f64,
    row: Vec<f64>,
    col: Vec<f64>,
    total: f64,
    row_count: Vec<u32>,
    col_count: Vec<u32>,
    support: usize,
    /// CSR support pattern, filled only on request.
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
}

/// Column indices of every row sorted by increasing cost.
struct SortedRows {
    order: Vec<u32>,
    cost: Vec<f64>,
}

impl SortedRows {
    fn new(p: &Reduced) -> Self {
        let nc = p.nc();
        let mut order = Vec::with_capacity(p.cost.len());
        let mut cost = Vec::with_capacity(p.cost.len());
        for row in p.cost.chunks_exact(nc.max(1)) {
            let mut idx: Vec<u32> = (0..nc as u32).collect();
            idx.sort_by(|&i, &j| row[i as usize].total_cmp(&row[j as usize]).then(i.cmp(&j)));
            cost.extend(idx.iter().map(|&i| row[i as usize]));
            order.extend(idx);
        }
        Self { order, cost }
    }
}

struct DualAscent<'a> {
    p: &'a Reduced,
    sorted: &'a SortedRows,
    cfg: &'a SolverConfig,
    x: DualPoint,
    eval_x: Evaluation,
    /// Levenberg-Marquardt factor: the Newton system is regularized by
    /// `damping * |grad|_inf` times the identity.
    damping: f64,
}

/// Inner loop work for one row: `z = (a_hi + a_lo) - v_j - C_ij` in
/// double-double, where `a = tau - u_i`.
#[inline(always)]
fn reduced_cost(a_hi: f64, a_lo: f64, v: Dd, c: f64) -> f64 {
    let (s1, e1) = two_sum(a_hi, -v.hi);
    let (s2, e2) = two_sum(s1, -c);
    s2 + (e1 + e2 + a_lo - v.lo)
}

impl<'a> DualAscent<'a> {
    /// Starts from `start` with `tau` refitted to the mass constraint, or from
    /// `u = v = 0`, `tau = min C` (the zero plan).
    fn new(p: &'a Reduced, sorted: &'a SortedRows, cfg: &'a SolverConfig, start: Option<DualPoint>) -> Self {
        let refit = start.is_some();
        let x = start.unwrap_or_else(|| {
            let tau = p.cost.iter().copied().fold(f64::INFINITY, f64::min);
            DualPoint { u: vec![Dd::ZERO; p.nr()], v: vec![Dd::ZERO; p.nc()], tau: Dd::from_f64(tau) }
        });
        let mut me = Self { p, sorted, cfg, x, eval_x: Evaluation::default(), damping: 1.0 };
        me.eval_x = me.evaluate(&me.x, true);
        if refit {
            me.fit_tau();
        }
        me
    }

    /// Newton iteration on `tau` alone for `sum X = s`. The total is convex,
    /// piecewise linear and increasing in `tau`, so starting above the root
    /// the iteration decreases monotonically and terminates.
    fn fit_tau(&mut self) {
        for _ in 0..100 {
            let excess = self.eval_x.total - self.p.mass;
            if !(excess > 0.0) || self.eval_x.support == 0 {
                return;
            }
            let slope = self.eval_x.support as f64 / self.p.eps;
            let mut next = self.x.clone();
            next.tau = next.tau.add_f64(-excess / slope);
            let e = self.evaluate(&next, true);
            if e.total >= self.eval_x.total {
                return;
            }
            self.x = next;
            self.eval_x = e;
        }
    }

    fn evaluate(&self, x: &DualPoint, want_support: bool) -> Evaluation {
        let p = self.p;
        let (nr, nc) = (p.nr(), p.nc());
        let eps = p.eps;
        let mut row = Vec::with_capacity(nr);
        let mut row_count = Vec::with_capacity(nr);
        let mut cols = vec![KahanSum::new(); nc];
        let mut col_count = vec![0u32; nc];
        let mut sq = KahanSum::new();
        let mut total = KahanSum::new();
        let mut row_ptr = Vec::new();
        let mut col_idx = Vec::new();
        if want_support {
            row_ptr.reserve(nr + 1);
            row_ptr.push(0);
        }
        for a in 0..nr {
            let base = x.tau.add_f64(-x.u[a].hi);
            let (a_hi, a_lo) = (base.hi, base.lo - x.u[a].lo);
            let order = &self.sorted.order[a * nc..(a + 1) * nc];
            let costs = &self.sorted.cost[a * nc..(a + 1) * nc];
            // With v >= 0, no entry whose cost exceeds tau - u_a can be positive.
            let limit = a_hi + 2.0 * a_lo.abs();
            let mut acc = KahanSum::new();
            let mut cnt = 0u32;
            for (&c, &b) in costs.iter().zip(order) {
                if c > limit {
                    break;
                }
                let b = b as usize;
                let z = reduced_cost(a_hi, a_lo, x.v[b], c);
                if z > 0.0 {
                    let xv = z / eps;
                    acc.add(xv);
                    cols[b].add(xv);
                    col_count[b] += 1;
                    sq.add(z * xv);
                    cnt += 1;
                    if want_support {
                        col_idx.push(b as u32);
                    }
                }
            }
            if want_support {
                row_ptr.push(col_idx.len());
            }
            let rs = acc.value();
            total.add(rs);
            row.push(rs);
            row_count.push(cnt);
        }
        let col: Vec<f64> = cols.iter().map(|c| c.value()).collect();
        let mut value = KahanSum::new();
        value.add(-0.5 * sq.value());
        for (u, r) in x.u.iter().zip(&p.r) {
            value.add(-u.hi * r);
            value.add(-u.lo * r);
        }
        for (v, c) in x.v.iter().zip(&p.c) {
            value.add(-v.hi * c);
            value.add(-v.lo * c);
        }
        value.add(x.tau.hi * p.mass);
        value.add(x.tau.lo * p.mass);
        let support = row_count.iter().map(|&c| c as usize).sum();
        Evaluation {
            value: value.value(),
            row,
            col,
            total: total.value(),
            row_count,
            col_count,
            support,
            row_ptr,
            col_idx,
        }
    }

    fn gradient(&self, e: &Evaluation) -> (Vec<f64>, Vec<f64>, f64) {
        (
            e.row.iter().zip(&self.p.r).map(|(a, b)| a - b).collect(),
            e.col.iter().zip(&self.p.c).map(|(a, b)| a - b).collect(),
            self.p.mass - e.total,
        )
    }

    /// Largest of the marginal violations, the mass error and the
    /// complementary-slackness products.
    fn residual(&self, x: &DualPoint, e: &Evaluation) -> f64 {
        let p = self.p;
        let mut res = (e.total - p.mass).abs();
        for ((u, &row), &r) in x.u.iter().zip(&e.row).zip(&p.r) {
            res = res.max(row - r).max(u.to_f64() * (r - row).abs());
        }
        for ((v, &col), &c) in x.v.iter().zip(&e.col).zip(&p.c) {
            res = res.max(col - c).max(v.to_f64() * (c - col).abs());
        }
        res
    }

    fn plan_block(&self, x: &DualPoint) -> Vec<f64> {
        let p = self.p;
        let (nr, nc) = (p.nr(), p.nc());
        let mut out = vec![0.0; nr * nc];
        for a in 0..nr {
            let base = x.tau.add_f64(-x.u[a].hi);
            let (a_hi, a_lo) = (base.hi, base.lo - x.u[a].lo);
            for b in 0..nc {
                let z = reduced_cost(a_hi, a_lo, x.v[b], p.cost[a * nc + b]);
                if z > 0.0 {
                    out[a * nc + b] = z / p.eps;
                }
            }
        }
        out
    }

    fn observe(&self, it: usize, step: StepKind, res: f64, observer: &mut impl FnMut(&IterateInfo<'_>)) {
        let u: Vec<f64> = self.x.u.iter().map(|d| d.to_f64()).collect();
        let v: Vec<f64> = self.x.v.iter().map(|d| d.to_f64()).collect();
        observer(&IterateInfo {
            iteration: it,
            step,
            dual_value: self.eval_x.value,
            kkt_residual: res,
            u: &u,
            v: &v,
            tau: self.x.tau.to_f64(),
        });
    }

    fn run(&mut self, observer: &mut impl FnMut(&IterateInfo<'_>), tol: f64, budget: usize) -> Outcome {
        let cfg = self.cfg;
        let mut res = self.residual(&self.x, &self.eval_x);
        self.observe(0, StepKind::Initial, res, observer);

        let mut y = self.x.clone();
        let mut eval_y = self.eval_x.clone();
        let mut theta = 1.0f64;
        let mut step = 1.0f64;
        let mut newton_wait = 3usize;
        let mut best_res = res;
        let mut best_value = self.eval_x.value;
        let mut best_at = 0usize;

        let mut it = 0;
        while it < budget {
            if res <= tol {
                return Outcome { iterations: it, converged: true, residual: res };
            }
            if it - best_at > cfg.stall_window {
                break;
            }
            it += 1;

            if cfg.polish && newton_wait == 0 {
                if self.newton_step() {
                    res = self.residual(&self.x, &self.eval_x);
                    y = self.x.clone();
                    eval_y = self.eval_x.clone();
                    theta = 1.0;
                    track_progress(res, self.eval_x.value, it, &mut best_res, &mut best_value, &mut best_at);
                    self.observe(it, StepKind::Newton, res, observer);
                    continue;
                }
                newton_wait = 10;
            }
            newton_wait = newton_wait.saturating_sub(1);

            // Projected gradient step from y with a Jacobi-scaled direction.
            let (gu, gv, gt) = self.gradient(&eval_y);
            let eps = self.p.eps;
            let du: Vec<f64> = gu
                .iter()
                .zip(&eval_y.row_count)
                .map(|(g, &k)| eps * g / (k.max(1) as f64))
                .collect();
            let dv: Vec<f64> = gv
                .iter()
                .zip(&eval_y.col_count)
                .map(|(g, &k)| eps * g / (k.max(1) as f64))
                .collect();
            let dt = eps * gt / (eval_y.support.max(1) as f64);

            let mut accepted = None;
            let mut t = step;
            for _ in 0..80 {
                let cand = y.step(&du, &dv, dt, t);
                let (mu, mv, mt) = cand.diff(&y);
                let slope = dot(&gu, &mu) + dot(&gv, &mv) + gt * mt;
                let e = self.evaluate(&cand, true);
                if e.value >= eval_y.value + cfg.armijo_slope * slope {
                    accepted = Some((cand, e));
                    break;
                }
                t *= cfg.backtrack_factor;
            }
            let Some((cand, e)) = accepted else {
                // No ascent possible at working precision from y.
                if cfg.acceleration == Acceleration::Nesterov && theta > 1.0 {
                    theta = 1.0;
                    y = self.x.clone();
                    eval_y = self.eval_x.clone();
                    continue;
                }
                step = 1.0;
                continue;
            };
            step = (t / cfg.backtrack_factor).min(1e30);

            if cfg.acceleration == Acceleration::Nesterov && e.value < self.eval_x.value {
                // Function-value restart: drop momentum and retry from x.
                theta = 1.0;
                y = self.x.clone();
                eval_y = self.eval_x.clone();
                continue;
            }

            let x_prev = std::mem::replace(&mut self.x, cand);
            self.eval_x = e;
            res = self.residual(&self.x, &self.eval_x);
            track_progress(res, self.eval_x.value, it, &mut best_res, &mut best_value, &mut best_at);
            self.observe(it, StepKind::Gradient, res, observer);

            match cfg.acceleration {
                Acceleration::None => {
                    y = self.x.clone();
                    eval_y = self.eval_x.clone();
                }
                Acceleration::Nesterov => {
                    let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
                    let beta = (theta - 1.0) / theta_next;
                    theta = theta_next;
                    if beta > 0.0 {
                        let (mu, mv, mt) = self.x.diff(&x_prev);
                        y = self.x.step(&mu, &mv, mt, beta);
                        eval_y = self.evaluate(&y, true);
                    } else {
                        y = self.x.clone();
                        eval_y = self.eval_x.clone();
                    }
                }
            }
        }
        let converged = res <= tol;
        Outcome { iterations: it, converged, residual: res }
    }

    /// One projected Newton step on the current support. Returns whether a
    /// step was accepted.
    fn newton_step(&mut self) -> bool {
        let p = self.p;
        let (nr, nc) = (p.nr(), p.nc());
        let e = &self.eval_x;
        if e.support == 0 {
            return false;
        }
        let (gu, gv, gt) = self.gradient(e);
        // Multipliers within `band` of the bound whose gradient pushes them
        // into it are held fixed, so the step is not cut by the projection.
        let band = {
            let du = self.x.u.iter().zip(&gu).zip(&e.row_count).map(|((u, &g), &k)| {
                let d = p.eps * g / (k.max(1) as f64);
                (u.hi - (u.hi + d).max(0.0)).abs()
            });
            let dv = self.x.v.iter().zip(&gv).zip(&e.col_count).map(|((v, &g), &k)| {
                let d = p.eps * g / (k.max(1) as f64);
                (v.hi - (v.hi + d).max(0.0)).abs()
            });
            du.chain(dv).fold(0.0, f64::max)
        };
        let free_u: Vec<bool> = self.x.u.iter().zip(&gu).map(|(u, &g)| g > 0.0 || u.hi > band).collect();
        let free_v: Vec<bool> = self.x.v.iter().zip(&gv).map(|(v, &g)| g > 0.0 || v.hi > band).collect();

        let gmax = gu
            .iter()
            .zip(&free_u)
            .chain(gv.iter().zip(&free_v))
            .filter(|(_, &f)| f)
            .fold(gt.abs(), |m, (g, _)| m.max(g.abs()));
        let reg = (self.damping * gmax).max(1e-12);
        let sys = PatternSystem { nr, nc, row_ptr: &e.row_ptr, col_idx: &e.col_idx, free_u: &free_u, free_v: &free_v, reg };
        let rhs_u: Vec<f64> = gu.iter().zip(&free_u).map(|(g, &f)| if f { p.eps * g } else { 0.0 }).collect();
        let rhs_v: Vec<f64> = gv.iter().zip(&free_v).map(|(g, &f)| if f { p.eps * g } else { 0.0 }).collect();
        let rhs_t = p.eps * gt;
        let diag_u: Vec<f64> = e.row_count.iter().map(|&k| k as f64 + sys.reg).collect();
        let diag_v: Vec<f64> = e.col_count.iter().map(|&k| k as f64 + sys.reg).collect();
        let diag_t = e.support as f64 + sys.reg;
        let pr = sys.direct(&rhs_u, &rhs_v, rhs_t).or_else(|| sys.pcg(&rhs_u, &rhs_v, rhs_t, &diag_u, &diag_v, diag_t));
        let Some((mut du, mut dv, dt)) = pr else {
            return false;
        };
        // Held multipliers follow the scaled gradient towards their bound.
        for (a, d) in du.iter_mut().enumerate() {
            if !free_u[a] {
                *d = p.eps * gu[a] / (e.row_count[a].max(1) as f64);
            }
        }
        for (b, d) in dv.iter_mut().enumerate() {
            if !free_v[b] {
                *d = p.eps * gv[b] / (e.col_count[b].max(1) as f64);
            }
        }

        let old_res = self.residual(&self.x, e);
        let mut t = 1.0;
        for k in 0..30 {
            let cand = self.x.step(&du, &dv, dt, t);
            let (mu, mv, mt) = cand.diff(&self.x);
            let slope = dot(&gu, &mu) + dot(&gv, &mv) + gt * mt;
            let ce = self.evaluate(&cand, true);
            let armijo = ce.value >= e.value + self.cfg.armijo_slope * slope && ce.value > e.value;
            let refine = k == 0 && {
                let r = self.residual(&cand, &ce);
                r < 0.5 * old_res && ce.value >= e.value - 1e-14 * e.value.abs().max(1.0)
            };
            if armijo || refine {
                if k == 0 {
                    self.damping = (self.damping * 0.25).max(1e-8);
                } else if k > 2 {
                    self.damping = (self.damping * 4.0).min(1e8);
                }
                self.x = cand;
                self.eval_x = ce;
                return true;
            }
            t *= 0.5;
        }
        self.damping = (self.damping * 16.0).min(1e8);
        false
    }
}

/// Progress means the residual halved or the dual value rose measurably.
fn track_progress(res: f64, value: f64, it: usize, best_res: &mut f64, best_value: &mut f64, best_at: &mut usize) {
    if res < 0.5 * *best_res {
        *best_res = res;
        *best_at = it;
    }
    if value > *best_value + 1e-13 * best_value.abs().max(1e-3) {
        *best_value = value;
        *best_at = it;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Generalized Hessian `M = Σ_{(i,j) ∈ S} a_ij a_ijᵀ` (plus a small ridge)
/// restricted to the free multipliers, with `a_ij = -e_{u_i} - e_{v_j} + e_tau`.
struct PatternSystem<'a> {
    nr: usize,
    nc: usize,
    row_ptr: &'a [usize],
    col_idx: &'a [u32],
    free_u: &'a [bool],
    free_v: &'a [bool],
    reg: f64,
}

impl PatternSystem<'_> {
    fn apply(&self, du: &[f64], dv: &[f64], dt: f64, ou: &mut [f64], ov: &mut [f64]) -> f64 {
        ou.iter_mut().for_each(|x| *x = 0.0);
        ov.iter_mut().for_each(|x| *x = 0.0);
        let mut ot = 0.0;
        for a in 0..self.nr {
            let ua = if self.free_u[a] { du[a] } else { 0.0 };
            let mut acc = 0.0;
            for &b in &self.col_idx[self.row_ptr[a]..self.row_ptr[a + 1]] {
                let b = b as usize;
                let vb = if self.free_v[b] { dv[b] } else { 0.0 };
                let w = dt - ua - vb;
                acc += w;
                ov[b] -= w;
            }
            ou[a] = -acc;
            ot += acc;
        }
        for a in 0..self.nr {
            ou[a] = if self.free_u[a] { ou[a] + self.reg * du[a] } else { 0.0 };
        }
        for b in 0..self.nc {
            ov[b] = if self.free_v[b] { ov[b] + self.reg * dv[b] } else { 0.0 };
        }
        ot + self.reg * dt
    }

    /// Solves the system by sparse elimination; `None` when the factor
    /// would be much denser than the support.
    fn direct(&self, bu: &[f64], bv: &[f64], bt: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        let (nr, nc) = (self.nr, self.nc);
        let t = nr + nc;
        let mut m = SparseSym::new(t + 1);
        for k in 0..=t {
            m.add_diag(k, self.reg);
        }
        for k in 0..nr {
            if !self.free_u[k] {
                m.add_diag(k, 1.0);
            }
        }
        for k in 0..nc {
            if !self.free_v[k] {
                m.add_diag(nr + k, 1.0);
            }
        }
        for a in 0..nr {
            let fa = self.free_u[a];
            for &b in &self.col_idx[self.row_ptr[a]..self.row_ptr[a + 1]] {
                let b = b as usize;
                let fb = self.free_v[b];
                m.add_diag(t, 1.0);
                if fa {
                    m.add_diag(a, 1.0);
                    m.add_pair(a, t, -1.0);
                }
                if fb {
                    m.add_diag(nr + b, 1.0);
                    m.add_pair(nr + b, t, -1.0);
                }
                if fa && fb {
                    m.add_pair(a, nr + b, 1.0);
                }
            }
        }
        let cap = 8 * (m.nnz() + t);
        let factor = m.factor(cap)?;
        let mut x: Vec<f64> = bu.iter().chain(bv).copied().chain([bt]).collect();
        factor.solve(&mut x);
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some((x[..nr].to_vec(), x[nr..t].to_vec(), x[t]))
    }

    /// Jacobi-preconditioned conjugate gradients.
    #[allow(clippy::too_many_arguments)]
    fn pcg(
        &self,
        bu: &[f64],
        bv: &[f64],
        bt: f64,
        diag_u: &[f64],
        diag_v: &[f64],
        diag_t: f64,
    ) -> Option<(Vec<f64>, Vec<f64>, f64)> {
        let (nr, nc) = (self.nr, self.nc);
        let mut xu = vec![0.0; nr];
        let mut xv = vec![0.0; nc];
        let mut xt = 0.0;
        let mut ru = bu.to_vec();
        let mut rv = bv.to_vec();
        let mut rt = bt;
        let norm_b = (dot(bu, bu) + dot(bv, bv) + bt * bt).sqrt();
        if norm_b == 0.0 {
            return None;
        }
        let mut zu: Vec<f64> = ru.iter().zip(diag_u).map(|(r, d)| r / d).collect();
        let mut zv: Vec<f64> = rv.iter().zip(diag_v).map(|(r, d)| r / d).collect();
        let mut zt = rt / diag_t;
        let mut pu = zu.clone();
        let mut pv = zv.clone();
        let mut pt = zt;
        let mut rz = dot(&ru, &zu) + dot(&rv, &zv) + rt * zt;
        let mut qu = vec![0.0; nr];
        let mut qv = vec![0.0; nc];
        let max_iter = (4 * (nr + nc + 1)).clamp(50, 4000);
        for _ in 0..max_iter {
            let qt = self.apply(&pu, &pv, pt, &mut qu, &mut qv);
            let pq = dot(&pu, &qu) + dot(&pv, &qv) + pt * qt;
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            for k in 0..nr {
                xu[k] += alpha * pu[k];
                ru[k] -= alpha * qu[k];
            }
            for k in 0..nc {
                xv[k] += alpha * pv[k];
                rv[k] -= alpha * qv[k];
            }
            xt += alpha * pt;
            rt -= alpha * qt;
            let norm_r = (dot(&ru, &ru) + dot(&rv, &rv) + rt * rt).sqrt();
            if norm_r <= 1e-13 * norm_b {
                break;
            }
            for k in 0..nr {
                zu[k] = ru[k] / diag_u[k];
            }
            for k in 0..nc {
                zv[k] = rv[k] / diag_v[k];
            }
            zt = rt / diag_t;
            let rz_new = dot(&ru, &zu) + dot(&rv, &zv) + rt * zt;
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..nr {
                pu[k] = zu[k] + beta * pu[k];
            }
            for k in 0..nc {
                pv[k] = zv[k] + beta * pv[k];
            }
            pt = zt + beta * pt;
        }
        let finite = xu.iter().chain(&xv).all(|x| x.is_finite()) && xt.is_finite();
        finite.then_some((xu, xv, xt))
    }
}

