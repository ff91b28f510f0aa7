use crate::problem::PotProblem;

/// A problem restricted to rows with `r_i > 0` and columns with `c_j > 0`.
///
/// Any feasible plan is zero on the dropped rows and columns, so the solvers
/// work on the (possibly rectangular) reduced block and embed the result.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub n: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    /// Row-major `rows.len() × cols.len()` block of the cost.
    pub cost: Vec<f64>,
    pub mass: f64,
    pub eps: f64,
}

impl Reduced {
    pub fn new(problem: &PotProblem) -> Self {
        let rows: Vec<usize> = (0..problem.n()).filter(|&i| problem.r().values()[i] > 0.0).collect();
        let cols: Vec<usize> = (0..problem.n()).filter(|&j| problem.c().values()[j] > 0.0).collect();
        let r = rows.iter().map(|&i| problem.r().values()[i]).collect();
        let c = cols.iter().map(|&j| problem.c().values()[j]).collect();
        let mut cost = Vec::with_capacity(rows.len() * cols.len());
        for &i in &rows {
            let full = problem.cost().row(i);
            cost.extend(cols.iter().map(|&j| full[j]));
        }
        Self { n: problem.n(), rows, cols, r, c, cost, mass: problem.mass(), eps: problem.epsilon() }
    }

    pub fn nr(&self) -> usize {
        self.rows.len()
    }

    pub fn nc(&self) -> usize {
        self.cols.len()
    }

    /// Scatters a reduced row-major block back into a dense `n × n` buffer.
    pub fn embed(&self, block: &[f64]) -> Vec<f64> {
        let n = self.n;
        let nc = self.nc();
        let mut out = vec![0.0; n * n];
        for (a, &i) in self.rows.iter().enumerate() {
            for (b, &j) in self.cols.iter().enumerate() {
                out[i * n + j] = block[a * nc + b];
            }
        }
        out
    }

    /// Extends reduced duals `(u, v)` to all rows and columns. Dropped rows and
    /// columns get the smallest nonnegative multiplier that keeps every reduced
    /// cost `tau - C_ij - u_i - v_j` nonpositive on them.
    pub fn embed_duals(&self, problem: &PotProblem, u: &[f64], v: &[f64], tau: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut u_full = vec![f64::NAN; n];
        let mut v_full = vec![f64::NAN; n];
        for (a, &i) in self.rows.iter().enumerate() {
            u_full[i] = u[a];
        }
        for (b, &j) in self.cols.iter().enumerate() {
            v_full[j] = v[b];
        }
        let cost = problem.cost();
        for j in 0..n {
            if v_full[j].is_nan() {
                let worst = self
                    .rows
                    .iter()
                    .map(|&i| tau - cost.get(i, j) - u_full[i])
                    .fold(0.0, f64::max);
                v_full[j] = worst;
            }
        }
        for i in 0..n {
            if u_full[i].is_nan() {
                let worst = (0..n).map(|j| tau - cost.get(i, j) - v_full[j]).fold(0.0, f64::max);
                u_full[i] = worst;
            }
        }
        (u_full, v_full)
    }
}
