//! Sparse symmetric positive definite solver by Gaussian elimination in
//! greedy minimum-degree order.
//!
//! The Newton systems of the quadratic solver live on the support graph of
//! the plan, which at small regularization is close to a forest; eliminating
//! low-degree vertices first then produces almost no fill.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

/// Symmetric matrix assembled from diagonal and off-diagonal contributions.
pub(crate) struct SparseSym {
    diag: Vec<f64>,
    adj: Vec<BTreeMap<usize, f64>>,
}

struct Pivot {
    node: usize,
    d: f64,
    links: Vec<(usize, f64)>,
}

/// Elimination record; applies the inverse of the factored matrix.
pub(crate) struct Factor {
    pivots: Vec<Pivot>,
}

impl SparseSym {
    pub fn new(dim: usize) -> Self {
        Self { diag: vec![0.0; dim], adj: vec![BTreeMap::new(); dim] }
    }

    pub fn add_diag(&mut self, i: usize, x: f64) {
        self.diag[i] += x;
    }

    pub fn add_pair(&mut self, i: usize, j: usize, x: f64) {
        debug_assert_ne!(i, j);
        *self.adj[i].entry(j).or_insert(0.0) += x;
        *self.adj[j].entry(i).or_insert(0.0) += x;
    }

    pub fn nnz(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum()
    }

    /// Factors the matrix. Gives up with `None` when the off-diagonal
    /// entry count would exceed `max_fill` or a pivot is not positive.
    pub fn factor(mut self, max_fill: usize) -> Option<Factor> {
        let dim = self.diag.len();
        let mut fill = self.nnz();
        let mut done = vec![false; dim];
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            (0..dim).map(|i| Reverse((self.adj[i].len(), i))).collect();
        let mut pivots = Vec::with_capacity(dim);
        while let Some(Reverse((deg, p))) = heap.pop() {
            if done[p] || deg != self.adj[p].len() {
                continue;
            }
            done[p] = true;
            let d = self.diag[p];
            if !(d > 0.0) {
                return None;
            }
            let links: Vec<(usize, f64)> = std::mem::take(&mut self.adj[p]).into_iter().collect();
            for &(i, _) in &links {
                self.adj[i].remove(&p);
            }
            fill -= 2 * links.len();
            for (x, &(i, ai)) in links.iter().enumerate() {
                let f = ai / d;
                self.diag[i] -= f * ai;
                for &(j, aj) in &links[x + 1..] {
                    let delta = -f * aj;
                    let before = self.adj[i].len();
                    *self.adj[i].entry(j).or_insert(0.0) += delta;
                    *self.adj[j].entry(i).or_insert(0.0) += delta;
                    if self.adj[i].len() > before {
                        fill += 2;
                    }
                }
            }
            if fill > max_fill {
                return None;
            }
            for &(i, _) in &links {
                heap.push(Reverse((self.adj[i].len(), i)));
            }
            pivots.push(Pivot { node: p, d, links });
        }
        Some(Factor { pivots })
    }
}

impl Factor {
    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve(&self, b: &mut [f64]) {
        for piv in &self.pivots {
            let bp = b[piv.node] / piv.d;
            for &(i, a) in &piv.links {
                b[i] -= a * bp;
            }
        }
        for piv in self.pivots.iter().rev() {
            let mut acc = b[piv.node];
            for &(i, a) in &piv.links {
                acc -= a * b[i];
            }
            b[piv.node] = acc / piv.d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::solve_dense;

    #[test]
    fn matches_dense_solve() {
        // Path graph plus a hub vertex joined to everything.
        let n = 7;
        let mut m = SparseSym::new(n);
        let mut dense = vec![0.0; n * n];
        let mut pair = |m: &mut SparseSym, i: usize, j: usize, x: f64| {
            m.add_pair(i, j, x);
            dense[i * n + j] += x;
            dense[j * n + i] += x;
        };
        for i in 0..n - 2 {
            pair(&mut m, i, i + 1, -1.0);
        }
        for i in 0..n - 1 {
            pair(&mut m, i, n - 1, 0.5);
        }
        for i in 0..n {
            let d = 4.0 + i as f64;
            m.add_diag(i, d);
            dense[i * n + i] += d;
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        m.factor(usize::MAX).unwrap().solve(&mut x);
        let mut y = rhs;
        solve_dense(&mut dense, &mut y, n, 1e-12).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut m = SparseSym::new(2);
        m.add_diag(0, 1.0);
        m.add_diag(1, 1.0);
        m.add_pair(0, 1, 2.0);
        assert!(m.factor(usize::MAX).is_none());
    }

    #[test]
    fn fill_cap_aborts() {
        let n = 6;
        let mut m = SparseSym::new(n);
        for i in 0..n {
            m.add_diag(i, 10.0);
            m.add_pair(i, (i + 1) % n, 1.0);
        }
        assert!(m.factor(2).is_none());
    }
}
