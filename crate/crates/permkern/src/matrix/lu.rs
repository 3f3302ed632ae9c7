//! Dense LU factorization with partial pivoting.
//!
//! Instances in this crate are small (n rarely above a hundred), so the
//! factorization favors robustness and determinism over speed: plain
//! row-major storage, full pivot search per column, no blocking.

use crate::error::{Error, Result};

pub(crate) struct Lu {
    n: usize,
    /// Packed L (unit lower, implicit diagonal) and U factors.
    lu: Vec<f64>,
    /// Row permutation: `perm[k]` is the original row now in position k.
    perm: Vec<usize>,
    /// Sign of the permutation, +1.0 or -1.0.
    sign: f64,
    /// True if a zero pivot was hit; factorization stops being usable for solves.
    singular: bool,
}

impl Lu {
    /// Factor a row-major n-by-n matrix.
    pub(crate) fn factor(a: &[f64], n: usize) -> Lu {
        debug_assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;

        for k in 0..n {
            // Pivot: largest magnitude in column k at or below the diagonal.
            let mut p = k;
            let mut best = lu[k * n + k].abs();
            for r in (k + 1)..n {
                let v = lu[r * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            if pivot == 0.0 {
                singular = true;
                continue;
            }
            for r in (k + 1)..n {
                let m = lu[r * n + k] / pivot;
                lu[r * n + k] = m;
                if m != 0.0 {
                    for c in (k + 1)..n {
                        lu[r * n + c] -= m * lu[k * n + c];
                    }
                }
            }
        }

        Lu {
            n,
            lu,
            perm,
            sign,
            singular,
        }
    }

    pub(crate) fn is_singular(&self) -> bool {
        self.singular
    }

    /// Determinant as the signed product of pivots. Exact zero when a zero
    /// pivot was encountered.
    pub(crate) fn det(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        let mut d = self.sign;
        for k in 0..self.n {
            d *= self.lu[k * self.n + k];
        }
        d
    }

    /// Solve LUx = Pb. Caller must have checked `is_singular`.
    pub(crate) fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert!(!self.singular);
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        // Forward substitution with unit lower factor.
        for r in 1..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc;
        }
        // Back substitution.
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in (r + 1)..n {
                acc -= self.lu[r * n + c] * x[c];
            }
            x[r] = acc / self.lu[r * n + r];
        }
        x
    }

    /// Infinity norm of the inverse, computed column by column. Cheap at the
    /// matrix sizes used here and exact enough for a condition estimate.
    pub(crate) fn inverse_inf_norm(&self) -> f64 {
        let n = self.n;
        let mut row_sums = vec![0.0f64; n];
        let mut e = vec![0.0f64; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve_vec(&e);
            e[j] = 0.0;
            for (sum, v) in row_sums.iter_mut().zip(col.iter()) {
                *sum += v.abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }
}

/// Infinity norm (max absolute row sum) of a row-major n-by-n matrix.
pub(crate) fn inf_norm(a: &[f64], n: usize) -> f64 {
    let mut best = 0.0f64;
    for r in 0..n {
        let s: f64 = a[r * n..(r + 1) * n].iter().map(|v| v.abs()).sum();
        if s > best {
            best = s;
        }
    }
    best
}

/// Solve with one step of iterative refinement and a residual guarantee.
///
/// The refined solution must satisfy `||Mx - b||_inf <= tol * (1 + ||b||_inf)`,
/// otherwise the system is reported as unsolvable at the requested accuracy.
pub(crate) fn solve_checked(a: &[f64], n: usize, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let lu = Lu::factor(a, n);
    if lu.is_singular() {
        return Err(Error::SingularMatrix);
    }
    let cond = inf_norm(a, n) * lu.inverse_inf_norm();
    if cond > 1e12 {
        return Err(Error::IllConditioned { cond });
    }

    let mut x = lu.solve_vec(b);
    let residual_vec = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|r| {
                let mut acc = b[r];
                for c in 0..n {
                    acc -= a[r * n + c] * x[c];
                }
                acc
            })
            .collect()
    };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, y| m.max(y.abs()));

    let b_inf = inf(b);
    let bound = tol * (1.0 + b_inf);
    let mut r = residual_vec(&x);
    if inf(&r) > bound {
        // One refinement pass is enough at cond <= 1e12.
        let dx = lu.solve_vec(&r);
        for (xi, di) in x.iter_mut().zip(dx.iter()) {
            *xi += di;
        }
        r = residual_vec(&x);
    }
    let res = inf(&r);
    if res > bound {
        return Err(Error::ResidualTooLarge {
            residual: res,
            tol: bound,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_identity() {
        let a = vec![1.0, 0.0, 0.0, 1.0];
        let lu = Lu::factor(&a, 2);
        assert_eq!(lu.det(), 1.0);
    }

    #[test]
    fn zero_pivot_marks_singular() {
        let a = vec![0.0, 0.0, 0.0, 0.0];
        let lu = Lu::factor(&a, 2);
        assert!(lu.is_singular());
        assert_eq!(lu.det(), 0.0);
    }

    #[test]
    fn refinement_meets_residual_bound() {
        let a = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 2.0];
        let b = vec![1.0, -2.0, 7.5];
        let x = solve_checked(&a, 3, &b, 1e-10).unwrap();
        for r in 0..3 {
            let mut acc = b[r];
            for c in 0..3 {
                acc -= a[r * 3 + c] * x[c];
            }
            assert!(acc.abs() <= 1e-10 * (1.0 + 7.5));
        }
    }
}
