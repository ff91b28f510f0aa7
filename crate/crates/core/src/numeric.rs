//! Small numeric kernels: error-free transformations, compensated sums and a
//! dense partial-pivot solver for the tiny systems of the exact oracle.

/// Error-free sum: returns `(s, e)` with `s = fl(a + b)` and `a + b = s + e` exactly.
#[inline(always)]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Neumaier-compensated accumulator. Summation order is the call order, so
/// results are reproducible for a fixed traversal.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn sum_compensated(xs: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// A value carried as an unevaluated sum `hi + lo` (double-double).
///
/// Dual variables of the quadratic solver are stored this way: at small
/// regularization one ulp of a dual variable moves the plan mass by more than
/// the convergence tolerance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    /// Adds a plain double, renormalizing the pair.
    #[inline]
    pub fn add_f64(self, x: f64) -> Self {
        let (s, e) = two_sum(self.hi, x);
        let e = e + self.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Solves the dense system `a x = b` in place by Gaussian elimination with
/// partial pivoting. `a` is row-major `k × k`. Returns `None` when a pivot
/// falls below `pivot_tol` in absolute value.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], k: usize, pivot_tol: f64) -> Option<()> {
    debug_assert_eq!(a.len(), k * k);
    debug_assert_eq!(b.len(), k);
    for col in 0..k {
        let mut piv = col;
        let mut best = a[col * k + col].abs();
        for row in col + 1..k {
            let v = a[row * k + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if !(best > pivot_tol) {
            return None;
        }
        if piv != col {
            for j in 0..k {
                a.swap(col * k + j, piv * k + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * k + col];
        for row in col + 1..k {
            let f = a[row * k + col] / d;
            if f == 0.0 {
                continue;
            }
            a[row * k + col] = 0.0;
            for j in col + 1..k {
                a[row * k + j] -= f * a[col * k + j];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..k).rev() {
        let mut acc = b[row];
        for j in row + 1..k {
            acc -= a[row * k + j] * b[j];
        }
        b[row] = acc / a[row * k + row];
    }
    Some(())
}

/// Numerically stable `log Σ exp(xᵢ)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sum_is_exact() {
        let (s, e) = two_sum(1.0, 1e-20);
        assert_eq!(s, 1.0);
        assert_eq!(e, 1e-20);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat_n(1e-16, 1000));
        let naive: f64 = xs.iter().sum();
        let comp = sum_compensated(&xs);
        assert_eq!(naive, 1.0);
        assert!((comp - (1.0 + 1e-13)).abs() < 1e-27);
    }

    #[test]
    fn dd_accumulates_below_ulp() {
        let mut x = Dd::from_f64(1.0);
        for _ in 0..10 {
            x = x.add_f64(1e-17);
        }
        assert_eq!(x.hi, 1.0);
        assert!((x.lo - 1e-16).abs() < 1e-30);
    }

    #[test]
    fn solve_dense_small_system() {
        // [2 1; 1 3] x = [3; 5] -> x = [0.8, 1.4]
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![3.0, 5.0];
        solve_dense(&mut a, &mut b, 2, 1e-12).unwrap();
        assert!((b[0] - 0.8).abs() < 1e-15);
        assert!((b[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn solve_dense_rejects_singular() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 2.0];
        assert!(solve_dense(&mut a, &mut b, 2, 1e-12).is_none());
    }

    #[test]
    fn lse_matches_direct() {
        let xs = [0.1, -2.0, 3.0];
        let direct = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
