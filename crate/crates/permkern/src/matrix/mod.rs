//! Dense kernel matrices and the determinant machinery behind the
//! Laplace-transform functional |I + K diag(s)|^(-alpha).
//!
//! Everything downstream (symmetrizability checks, scanners, samplers) goes
//! through the types here. Public indices are 1-based, matching the habitual
//! [1, n] labeling of finite index sets in this problem domain; storage is
//! row-major and 0-based internally.

mod io;
mod lu;

pub use io::{fmt_f64, rows_serde};
pub(crate) use lu::{inf_norm, solve_checked, Lu};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Residual guarantee for linear solves: ||Mx - b||_inf <= this * (1 + ||b||_inf).
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// A square real matrix, optionally tagged with strictly increasing site labels
/// (e.g. the points of an exponential-Toeplitz family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::KernelJson", into = "io::KernelJson")]
pub struct Kernel {
    n: usize,
    entries: Vec<f64>,
    labels: Option<Vec<f64>>,
}

impl Kernel {
    /// Build from a row-major flat vector of length n*n.
    pub fn from_flat(n: usize, entries: Vec<f64>) -> Result<Kernel> {
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for (pos, v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: pos / n + 1,
                    col: pos % n + 1,
                });
            }
        }
        Ok(Kernel {
            n,
            entries,
            labels: None,
        })
    }

    /// Build from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Kernel> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        Kernel::from_flat(n, rows.concat())
    }

    /// Identity matrix of size n.
    pub fn identity(n: usize) -> Kernel {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Kernel {
            n,
            entries,
            labels: None,
        }
    }

    /// Attach strictly increasing site labels (one per row/column).
    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Kernel> {
        if labels.len() != self.n || !strictly_increasing(&labels) {
            return Err(Error::InvalidLabels);
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Entry at 1-based position (i, j).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(
            i >= 1 && i <= self.n && j >= 1 && j <= self.n,
            "kernel index ({i},{j}) out of range 1..={}",
            self.n
        );
        self.entries[(i - 1) * self.n + (j - 1)]
    }

    /// Overwrite the entry at 1-based position (i, j).
    pub fn set_entry(&mut self, i: usize, j: usize, v: f64) {
        assert!(i >= 1 && i <= self.n && j >= 1 && j <= self.n);
        self.entries[(i - 1) * self.n + (j - 1)] = v;
    }

    /// Row-major flat view.
    pub fn flat(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn at(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.n + c]
    }

    /// Largest absolute entry; zero matrices report 0.
    pub fn scale(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// True if all entries are strictly positive.
    pub fn strictly_positive(&self) -> bool {
        self.entries.iter().all(|&v| v > 0.0)
    }

    /// Largest relative asymmetry |K_ij - K_ji| / scale (0 for 1x1).
    pub fn asymmetry(&self) -> f64 {
        let scale = self.scale().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for c in (r + 1)..self.n {
                worst = worst.max((self.at(r, c) - self.at(c, r)).abs() / scale);
            }
        }
        worst
    }

    /// Determinant via LU with partial pivoting. Singular inputs give 0
    /// within floating tolerance rather than an error.
    pub fn det(&self) -> f64 {
        Lu::factor(&self.entries, self.n).det()
    }

    /// Principal submatrix selected by a 1-based index set; labels restrict
    /// along with the rows/columns.
    pub fn principal_submatrix(&self, idx: &IndexSet) -> Result<Kernel> {
        idx.check_range(self.n)?;
        let m = idx.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in idx.indices() {
            for &j in idx.indices() {
                entries.push(self.at(i - 1, j - 1));
            }
        }
        let labels = self
            .labels
            .as_ref()
            .map(|ls| idx.indices().iter().map(|&i| ls[i - 1]).collect());
        Ok(Kernel {
            n: m,
            entries,
            labels,
        })
    }

    /// Solve self * x = b with a residual guarantee (see [`SOLVE_RESIDUAL_TOL`]).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        solve_checked(&self.entries, self.n, b, SOLVE_RESIDUAL_TOL)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|r| {
                let mut acc = 0.0;
                for c in 0..self.n {
                    acc += self.at(r, c) * v[c];
                }
                acc
            })
            .collect()
    }

    /// Inverse via column solves. Errors on singular or ill-conditioned input.
    pub fn inverse(&self) -> Result<Kernel> {
        let lu = Lu::factor(&self.entries, self.n);
        if lu.is_singular() {
            return Err(Error::SingularMatrix);
        }
        let cond = inf_norm(&self.entries, self.n) * lu.inverse_inf_norm();
        if cond > 1e12 {
            return Err(Error::IllConditioned { cond });
        }
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = lu.solve_vec(&e);
            e[j] = 0.0;
            for r in 0..n {
                inv[r * n + j] = col[r];
            }
        }
        Kernel::from_flat(n, inv)
    }

    /// Infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.entries, self.n)
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

/// Strictly positive diagonal matrix Lambda, used for conjugations
/// K -> Lambda K Lambda^(-1) that leave |I + K diag(s)| invariant.
///
/// Serializes as a bare array of diagonal entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiagonalScaling {
    diag: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiagonalScaling {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<DiagonalScaling> {
        DiagonalScaling::new(v)
    }
}

impl From<DiagonalScaling> for Vec<f64> {
    fn from(s: DiagonalScaling) -> Vec<f64> {
        s.diag
    }
}

impl DiagonalScaling {
    pub fn new(diag: Vec<f64>) -> Result<DiagonalScaling> {
        if diag.is_empty() || diag.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidScaling);
        }
        Ok(DiagonalScaling { diag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Conjugate: Lambda K Lambda^(-1).
    pub fn conjugate(&self, k: &Kernel) -> Result<Kernel> {
        if self.diag.len() != k.n() {
            return Err(Error::DimensionMismatch {
                expected: k.n(),
                got: self.diag.len(),
            });
        }
        let n = k.n();
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                entries.push(self.diag[r] * k.at(r, c) / self.diag[c]);
            }
        }
        Ok(Kernel {
            n,
            entries,
            labels: k.labels.clone(),
        })
    }
}

/// Nonempty, strictly increasing set of 1-based indices.
///
/// Serializes as a bare array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<IndexSet> {
        IndexSet::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Vec<usize> {
        s.indices
    }
}

impl IndexSet {
    pub fn new(indices: Vec<usize>) -> Result<IndexSet> {
        if indices.is_empty() || indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidIndexSet);
        }
        Ok(IndexSet { indices })
    }

    /// The full set [1, n].
    pub fn full(n: usize) -> IndexSet {
        IndexSet {
            indices: (1..=n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn check_range(&self, n: usize) -> Result<()> {
        let last = *self.indices.last().expect("nonempty by construction");
        if last > n {
            return Err(Error::IndexOutOfRange { index: last, n });
        }
        Ok(())
    }
}

/// |I + K diag(s)|^(-alpha), the Laplace-transform functional of an
/// alpha-permanental vector with kernel K evaluated at s >= 0.
///
/// Errors if the determinant is nonpositive, where the power is undefined.
pub fn lt_determinant(kernel: &Kernel, s: &[f64], alpha: f64) -> Result<f64> {
    if s.len() != kernel.n() {
        return Err(Error::DimensionMismatch {
            expected: kernel.n(),
            got: s.len(),
        });
    }
    if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidScalingVector);
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Parse(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    let det = det_i_plus_ks(kernel, s);
    if det <= 0.0 {
        return Err(Error::NonpositiveDeterminant { det });
    }
    Ok(det.powf(-alpha))
}

/// Determinant |I + K diag(s)| without the power, used by the randomized
/// equivalence test where sign information must be preserved.
pub fn det_i_plus_ks(kernel: &Kernel, s: &[f64]) -> f64 {
    let n = kernel.n();
    debug_assert_eq!(s.len(), n);
    let mut m = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let mut v = kernel.at(r, c) * s[c];
            if r == c {
                v += 1.0;
            }
            m.push(v);
        }
    }
    Lu::factor(&m, n).det()
}
