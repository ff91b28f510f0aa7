//! Entropic-regularized partial transport by Dykstra's algorithm with KL
//! projections, carried out in the log domain.
//!
//! The objective `<C, X> + (eps/2) sum(X log X - X)` equals `(eps/2)` times
//! the KL divergence of `X` from the kernel `K = exp(-2C/eps)`, so the optimal
//! plan is the KL projection of `K` onto the intersection of
//! `{X 1 <= r}`, `{X^T 1 <= c}` and `{sum X = s}`. Iterates are kept as
//! `X = K * exp(a_i + b_j + m)` and never leave log space.

use crate::error::{PotError, Result};
use crate::numeric::sum_compensated;
use crate::problem::{PotProblem, Regularizer, TransportPlan};
use crate::qpot::{cap_marginals, SolverConfig};
use crate::reduced::Reduced;

/// Entries more than this far below the running maximum are dropped from a
/// log-sum-exp: their relative contribution is below `e^-50`.
const LSE_CUTOFF: f64 = 50.0;

/// Sweeps between two convergence checks.
const CHECK_EVERY: usize = 10;

/// Dykstra state on the problem restricted to nonzero marginals.
#[derive(Debug, Clone)]
pub struct ScalingState {
    /// `-2 C_ij / eps`, row-major over the active rows and columns.
    pub log_kernel: Vec<f64>,
    pub log_row_scale: Vec<f64>,
    pub log_col_scale: Vec<f64>,
    pub log_mass_scale: f64,
    /// Dykstra corrections of the row, column and mass projections.
    pub row_correction: Vec<f64>,
    pub col_correction: Vec<f64>,
    pub mass_correction: f64,
    reduced: Reduced,
    log_kernel_t: Vec<f64>,
    log_r: Vec<f64>,
    log_c: Vec<f64>,
}

fn lse_shifted(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let mut acc = 0.0;
    for x in values {
        let d = x - m;
        if d > -LSE_CUTOFF {
            acc += d.exp();
        }
    }
    m + acc.ln()
}

impl ScalingState {
    pub fn new(problem: &PotProblem) -> Result<Self> {
        if problem.regularizer() != Regularizer::Entropic {
            return Err(PotError::Parameter("problem is not entropic-regularized".into()));
        }
        let reduced = Reduced::new(problem);
        let (nr, nc) = (reduced.nr(), reduced.nc());
        let scale = -2.0 / problem.epsilon();
        let log_kernel: Vec<f64> = reduced.cost.iter().map(|&c| scale * c).collect();
        let mut log_kernel_t = vec![0.0; nr * nc];
        for a in 0..nr {
            for b in 0..nc {
                log_kernel_t[b * nr + a] = log_kernel[a * nc + b];
            }
        }
        if log_kernel.iter().any(|x| !x.is_finite()) {
            return Err(PotError::Numerical("kernel exponent overflows; epsilon too small for the cost scale".into()));
        }
        let log_r = reduced.r.iter().map(|x| x.ln()).collect();
        let log_c = reduced.c.iter().map(|x| x.ln()).collect();
        Ok(Self {
            log_kernel,
            log_row_scale: vec![0.0; nr],
            log_col_scale: vec![0.0; nc],
            log_mass_scale: 0.0,
            row_correction: vec![0.0; nr],
            col_correction: vec![0.0; nc],
            mass_correction: 0.0,
            reduced,
            log_kernel_t,
            log_r,
            log_c,
        })
    }

    /// Moves the state to another regularization level keeping the implied
    /// duals `u = -(eps/2) a`, `v = -(eps/2) b`, `tau = (eps/2) m` fixed.
    /// Corrections telescope to the negated scalings and rescale with them.
    pub fn set_epsilon(&mut self, eps: f64) {
        let ratio = self.reduced.eps / eps;
        let scale = -2.0 / eps;
        for (k, &c) in self.log_kernel.iter_mut().zip(&self.reduced.cost) {
            *k = scale * c;
        }
        let (nr, nc) = (self.nr(), self.nc());
        for a in 0..nr {
            for b in 0..nc {
                self.log_kernel_t[b * nr + a] = self.log_kernel[a * nc + b];
            }
        }
        for x in self
            .log_row_scale
            .iter_mut()
            .chain(&mut self.log_col_scale)
            .chain(&mut self.row_correction)
            .chain(&mut self.col_correction)
        {
            *x *= ratio;
        }
        self.log_mass_scale *= ratio;
        self.mass_correction *= ratio;
        self.reduced.eps = eps;
    }

    fn nr(&self) -> usize {
        self.reduced.nr()
    }

    fn nc(&self) -> usize {
        self.reduced.nc()
    }

    /// `log sum_j K_ij exp(b_j)` for every active row.
    fn row_lse(&self) -> Vec<f64> {
        let nc = self.nc();
        (0..self.nr())
            .map(|a| {
                let k = &self.log_kernel[a * nc..(a + 1) * nc];
                lse_shifted(k.iter().zip(&self.log_col_scale).map(|(k, b)| k + b))
            })
            .collect()
    }

    /// `log sum_i K_ij exp(a_i)` for every active column.
    fn col_lse(&self) -> Vec<f64> {
        let nr = self.nr();
        (0..self.nc())
            .map(|b| {
                let k = &self.log_kernel_t[b * nr..(b + 1) * nr];
                lse_shifted(k.iter().zip(&self.log_row_scale).map(|(k, a)| k + a))
            })
            .collect()
    }

    /// KL projection onto `{X 1 <= r}` with Dykstra correction.
    pub fn project_rows(&mut self) {
        let lse = self.row_lse();
        let m = self.log_mass_scale;
        for a in 0..self.nr() {
            let shifted = self.log_row_scale[a] + self.row_correction[a];
            let exact = self.log_r[a] - m - lse[a];
            let next = shifted.min(exact);
            self.row_correction[a] = shifted - next;
            self.log_row_scale[a] = next;
        }
    }

    /// KL projection onto `{X^T 1 <= c}` with Dykstra correction.
    pub fn project_cols(&mut self) {
        let lse = self.col_lse();
        self.project_cols_with(&lse);
    }

    fn project_cols_with(&mut self, lse: &[f64]) {
        let m = self.log_mass_scale;
        for b in 0..self.nc() {
            let shifted = self.log_col_scale[b] + self.col_correction[b];
            let exact = self.log_c[b] - m - lse[b];
            let next = shifted.min(exact);
            self.col_correction[b] = shifted - next;
            self.log_col_scale[b] = next;
        }
    }

    /// KL projection onto `{sum X = s}` with Dykstra correction.
    pub fn project_mass(&mut self) {
        let lse = self.col_lse();
        self.project_mass_with(&lse);
    }

    /// Mass projection from column sums `lse` taken at the current row scales.
    fn project_mass_with(&mut self, lse: &[f64]) {
        let total = lse_shifted(lse.iter().zip(&self.log_col_scale).map(|(l, b)| l + b));
        let shifted = self.log_mass_scale + self.mass_correction;
        let next = self.reduced.mass.ln() - total;
        self.mass_correction = shifted - next;
        self.log_mass_scale = next;
    }

    /// One Dykstra cycle: rows, columns, mass.
    pub fn sweep(&mut self) {
        self.project_rows();
        // The column projection leaves the row scales alone, so both
        // remaining projections share one pass over the kernel.
        let lse = self.col_lse();
        self.project_cols_with(&lse);
        self.project_mass_with(&lse);
    }

    pub fn is_finite(&self) -> bool {
        self.log_row_scale.iter().chain(&self.log_col_scale).all(|x| x.is_finite())
            && self.log_mass_scale.is_finite()
            && self.row_correction.iter().chain(&self.col_correction).all(|x| x.is_finite())
            && self.mass_correction.is_finite()
    }

    fn plan_block(&self) -> Vec<f64> {
        let (nr, nc) = (self.nr(), self.nc());
        let m = self.log_mass_scale;
        let mut out = Vec::with_capacity(nr * nc);
        for a in 0..nr {
            let base = self.log_row_scale[a] + m;
            for b in 0..nc {
                out.push((self.log_kernel[a * nc + b] + base + self.log_col_scale[b]).exp());
            }
        }
        out
    }

    /// The implied plan `K * exp(a + b + m)`, embedded at full size.
    pub fn plan(&self) -> TransportPlan {
        TransportPlan::from_raw(self.reduced.n, self.reduced.embed(&self.plan_block()), 0, false)
    }

    /// Largest marginal or mass violation of the implied plan together with
    /// the complementary-slackness residual `(eps/2) * p_i * |r_i - row_i|`,
    /// where `p` are the inequality corrections.
    pub fn residual(&self) -> f64 {
        let (nr, nc) = (self.nr(), self.nc());
        let block = self.plan_block();
        let rows: Vec<f64> = block.chunks_exact(nc).map(sum_compensated).collect();
        let mut cols = vec![0.0; nc];
        for row in block.chunks_exact(nc) {
            for (c, x) in cols.iter_mut().zip(row) {
                *c += x;
            }
        }
        let half_eps = 0.5 * self.reduced.eps;
        let mut res = (sum_compensated(&rows) - self.reduced.mass).abs();
        for a in 0..nr {
            let r = self.reduced.r[a];
            res = res.max(rows[a] - r).max(half_eps * self.row_correction[a] * (r - rows[a]).abs());
        }
        for b in 0..nc {
            let c = self.reduced.c[b];
            res = res.max(cols[b] - c).max(half_eps * self.col_correction[b] * (c - cols[b]).abs());
        }
        res
    }
}

/// Solves the entropic problem and rounds the result onto the feasible set.
pub fn solve_epot(problem: &PotProblem, config: &SolverConfig) -> Result<TransportPlan> {
    if problem.regularizer() != Regularizer::Entropic {
        return Err(PotError::Parameter("problem is not entropic-regularized".into()));
    }
    config.validate()?;
    let n = problem.n();
    if problem.mass() == 0.0 {
        return Ok(TransportPlan::zeros(n));
    }
    let mut state = ScalingState::new(problem)?;
    let target = problem.epsilon();
    let schedule = if config.continuation { continuation_schedule(&state.reduced.cost, target) } else { vec![target] };
    let last = schedule.len() - 1;
    let mut sweeps = 0;
    let mut converged = false;
    for (k, &eps) in schedule.iter().enumerate() {
        if eps != state.reduced.eps {
            state.set_epsilon(eps);
        }
        let (tol, budget) = if k == last {
            (config.kkt_tolerance, config.max_iterations.saturating_sub(sweeps).max(1))
        } else {
            (STAGE_TOLERANCE.max(config.kkt_tolerance), (config.max_iterations.saturating_sub(sweeps) / 2).max(1))
        };
        let (used, ok) = run_stage(&mut state, tol, budget, config.stall_window)?;
        sweeps += used;
        converged = ok;
    }
    let mut plan = state.plan();
    plan.iterations = sweeps;
    plan.converged = converged;
    round_to_feasible(&plan, problem)
}

/// Residual target of the intermediate continuation stages.
const STAGE_TOLERANCE: f64 = 1e-7;

/// Regularization levels a factor of ten apart from the largest cost down to
/// `eps`. Stages at large `eps` converge in a few sweeps and hand their duals
/// to the next one.
fn continuation_schedule(cost: &[f64], eps: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut level = cost.iter().copied().fold(0.0, f64::max);
    while level > 10.0 * eps {
        out.push(level);
        level /= 10.0;
    }
    out.push(eps);
    out
}

/// Sweeps until the residual reaches `tol`, the budget runs out or the
/// residual plateaus. Returns the sweep count and whether `tol` was met.
fn run_stage(state: &mut ScalingState, tol: f64, budget: usize, stall_window: usize) -> Result<(usize, bool)> {
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    let mut sweeps = 0;
    while sweeps < budget {
        state.sweep();
        sweeps += 1;
        if !state.is_finite() {
            return Err(PotError::Numerical(format!("non-finite scaling after {sweeps} sweeps")));
        }
        if sweeps % CHECK_EVERY == 0 || sweeps == budget {
            let res = state.residual();
            if res <= tol {
                return Ok((sweeps, true));
            }
            if res < 0.99 * best {
                best = res;
                best_at = sweeps;
            } else if sweeps - best_at >= stall_window {
                break;
            }
        }
    }
    Ok((sweeps, false))
}

/// Plain-exponential Dykstra iteration. Only usable when the kernel does not
/// underflow; kept as a reference for the log-domain solver.
pub fn solve_epot_direct(problem: &PotProblem, sweeps: usize) -> Result<TransportPlan> {
    if problem.regularizer() != Regularizer::Entropic {
        return Err(PotError::Parameter("problem is not entropic-regularized".into()));
    }
    let n = problem.n();
    if problem.mass() == 0.0 {
        return Ok(TransportPlan::zeros(n));
    }
    let eps = problem.epsilon();
    let k: Vec<f64> = problem.cost().entries().iter().map(|c| (-2.0 * c / eps).exp()).collect();
    if k.contains(&0.0) {
        return Err(PotError::Numerical("kernel underflows; use the log-domain solver".into()));
    }
    let r = problem.r().values();
    let c = problem.c().values();
    let (mut x, mut y, mut z) = (vec![1.0; n], vec![1.0; n], 1.0);
    let (mut qx, mut qy, mut qz) = (vec![1.0; n], vec![1.0; n], 1.0);
    for _ in 0..sweeps {
        for i in 0..n {
            let t = x[i] * qx[i];
            let row: f64 = (0..n).map(|j| k[i * n + j] * y[j]).sum::<f64>() * z * t;
            let next = if row > 0.0 { t * (r[i] / row).min(1.0) } else { 0.0 };
            qx[i] = if next > 0.0 { t / next } else { 1.0 };
            x[i] = next;
        }
        for j in 0..n {
            let t = y[j] * qy[j];
            let col: f64 = (0..n).map(|i| k[i * n + j] * x[i]).sum::<f64>() * z * t;
            let next = if col > 0.0 { t * (c[j] / col).min(1.0) } else { 0.0 };
            qy[j] = if next > 0.0 { t / next } else { 1.0 };
            y[j] = next;
        }
        let t = z * qz;
        let total: f64 = (0..n).map(|i| (0..n).map(|j| k[i * n + j] * x[i] * y[j]).sum::<f64>()).sum::<f64>() * t;
        let next = t * problem.mass() / total;
        qz = t / next;
        z = next;
    }
    let entries = (0..n * n).map(|p| k[p] * x[p / n] * y[p % n] * z).collect();
    Ok(TransportPlan::from_raw(n, entries, sweeps, false))
}

/// Repairs small marginal and mass violations: up to five rounds of rescaling
/// to mass `s` and capping rows at `r` and columns at `c`, then the remaining
/// deficit spread in proportion to row-slack times column-slack.
pub fn round_to_feasible(plan: &TransportPlan, problem: &PotProblem) -> Result<TransportPlan> {
    let s = problem.mass();
    let r = problem.r().values();
    let c = problem.c().values();
    let n = plan.n();
    if n != problem.n() {
        return Err(PotError::Shape(format!("plan is {n}x{n}, problem has {} bins", problem.n())));
    }
    if plan.entries().iter().any(|&x| x < 0.0) {
        return Err(PotError::Domain("plan has negative entries".into()));
    }
    let mut out = plan.clone();
    if s == 0.0 {
        out.entries_mut().iter_mut().for_each(|e| *e = 0.0);
        return Ok(out);
    }
    let tol = 1e-15 * s.max(1.0);
    let total = out.total();
    if total <= 0.0 {
        return Err(PotError::DegeneratePlan { requested: s });
    }
    let feasible = |p: &TransportPlan| {
        p.row_sums().iter().zip(r).all(|(x, cap)| x <= cap)
            && p.col_sums().iter().zip(c).all(|(x, cap)| x <= cap)
            && (p.total() - s).abs() <= tol
    };
    if feasible(&out) {
        return Ok(out);
    }
    for _ in 0..5 {
        let total = out.total();
        if total > 0.0 && (total - s).abs() > tol {
            let f = s / total;
            out.entries_mut().iter_mut().for_each(|e| *e *= f);
        }
        if feasible(&out) {
            return Ok(out);
        }
        cap_marginals(&mut out, r, c);
    }
    let deficit = s - out.total();
    if deficit > 0.0 {
        let slack_r: Vec<f64> = out.row_sums().iter().zip(r).map(|(x, cap)| (cap - x).max(0.0)).collect();
        let slack_c: Vec<f64> = out.col_sums().iter().zip(c).map(|(x, cap)| (cap - x).max(0.0)).collect();
        let (sr, sc): (f64, f64) = (slack_r.iter().sum(), slack_c.iter().sum());
        // A shortfall at round-off level is left in place.
        if deficit - sr.min(sc) > 1e-12 * s.max(1.0) {
            return Err(PotError::Invariant(format!(
                "cannot place mass deficit {deficit:e}: row slack {sr:e}, column slack {sc:e}"
            )));
        }
        let placed = deficit.min(sr).min(sc);
        if placed <= 0.0 {
            return Ok(out);
        }
        let scale = placed / (sr * sc);
        let entries = out.entries_mut();
        for i in 0..n {
            if slack_r[i] > 0.0 {
                for j in 0..n {
                    entries[i * n + j] += scale * slack_r[i] * slack_c[j];
                }
            }
        }
    }
    Ok(out)
}
