//! The 3-cycle residual functional F, diagonal-plus-constant form detection,
//! and block-wise scans over composed kernels.
//!
//! F on a triple is the signed difference of the two oriented cycle products.
//! A nonzero F certifies that the 3x3 principal submatrix is not equivalent
//! to any symmetric matrix; F vanishes identically exactly when the base
//! block is of diagonal-plus-constant form, whatever column shift is added.

mod limit;
mod scan;

pub use limit::{limit_point_check, LimitPointConfig, LimitPointReport, TailCheck, TailOutcome};
pub use scan::{asymptotic_scan, AsymptoticVerdict, ScanConfig, ScanSource, ThresholdWitness};

use crate::error::{Error, Result};
use crate::matrix::Kernel;
use serde::{Deserialize, Serialize};

/// Default relative tolerance for form detection.
pub const FORM_TOL: f64 = 1e-10;

/// Signed residual of the two oriented entry-product cycles on one triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleResidual {
    pub indices: (usize, usize, usize),
    /// fwd - rev; may underflow to zero for deep-tail structured scans.
    pub value: f64,
    /// value divided by the square root of the product of the six entries
    /// (their geometric mean cubed), making floors scale-free.
    pub normalized: f64,
    /// ln |value|, carried separately so magnitudes below the smallest
    /// positive double remain comparable.
    pub ln_abs: f64,
    /// -1, 0, or +1; nonzero means F != 0 held at evaluation precision or,
    /// for structured scans, by the monotonicity of the factored form.
    pub sign: i8,
}

impl TripleResidual {
    pub(crate) fn from_parts(
        indices: (usize, usize, usize),
        sign: f64,
        ln_abs: f64,
        ln_entry_sum: f64,
    ) -> TripleResidual {
        TripleResidual {
            indices,
            value: sign * ln_abs.exp(),
            normalized: sign * (ln_abs - 0.5 * ln_entry_sum).exp(),
            ln_abs,
            sign: if sign > 0.0 {
                1
            } else if sign < 0.0 {
                -1
            } else {
                0
            },
        }
    }
}

/// F = K[i1,i2] K[i2,i3] K[i3,i1] - K[i1,i3] K[i3,i2] K[i2,i1], evaluated on
/// the entries as stored. Requires strictly positive participating entries so
/// the scale normalization is meaningful.
pub fn triple_residual(k: &Kernel, i1: usize, i2: usize, i3: usize) -> Result<TripleResidual> {
    if i1 == i2 || i1 == i3 || i2 == i3 {
        return Err(Error::RepeatedTripleIndex);
    }
    let n = k.n();
    for &i in &[i1, i2, i3] {
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
    }
    let entries = [(i1, i2), (i2, i3), (i3, i1), (i1, i3), (i3, i2), (i2, i1)];
    let mut ln_sum = 0.0;
    let mut vals = [0.0f64; 6];
    for (slot, &(r, c)) in vals.iter_mut().zip(entries.iter()) {
        let e = k.entry(r, c);
        if e <= 0.0 {
            return Err(Error::NonpositiveEntry { row: r, col: c });
        }
        ln_sum += e.ln();
        *slot = e;
    }
    let fwd = vals[0] * vals[1] * vals[2];
    let rev = vals[3] * vals[4] * vals[5];
    let value = fwd - rev;
    Ok(TripleResidual {
        indices: (i1, i2, i3),
        value,
        normalized: value * (-0.5 * ln_sum).exp(),
        ln_abs: value.abs().ln(),
        sign: if value > 0.0 {
            1
        } else if value < 0.0 {
            -1
        } else {
            0
        },
    })
}

/// Classification of a symmetric 3x3 block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BlockForm {
    /// W = diag(lam) + d * ones; the exceptional family whose column
    /// perturbations all stay symmetrizable.
    DiagonalPlusConstant {
        lam: [f64; 3],
        d: f64,
    },
    General {
        max_offdiag_spread: f64,
    },
}

/// Decide whether a symmetric block is of diagonal-plus-constant form.
///
/// The three off-diagonal values must agree within `tol` (relative to the
/// block scale); ties at the tolerance boundary fall to `General`, which at
/// worst triggers a perturbation search that fails cleanly.
pub fn detect_form(w: &Kernel, tol: f64) -> Result<BlockForm> {
    if w.n() != 3 {
        return Err(Error::NotTripleBlock { got: w.n() });
    }
    let scale = w.scale().max(f64::MIN_POSITIVE);
    let asym = w.asymmetry();
    if asym > tol.max(1e-12) {
        return Err(Error::NotSymmetric {
            row: 0,
            col: 0,
            deviation: asym,
        });
    }
    for i in 1..=3 {
        for j in 1..=3 {
            if i != j {
                let cap = w.entry(i, i).min(w.entry(j, j));
                let excess = w.entry(i, j) - cap;
                if excess > tol.max(1e-12) * scale {
                    return Err(Error::DominationViolation {
                        row: i,
                        col: j,
                        deviation: excess / scale,
                    });
                }
            }
        }
    }
    let a = 0.5 * (w.entry(1, 2) + w.entry(2, 1));
    let b = 0.5 * (w.entry(2, 3) + w.entry(3, 2));
    let c = 0.5 * (w.entry(1, 3) + w.entry(3, 1));
    let hi = a.max(b).max(c);
    let lo = a.min(b).min(c);
    let spread = hi - lo;
    if spread <= tol * scale && lo >= -tol * scale {
        let d = ((a + b + c) / 3.0).max(0.0);
        let lam = [
            (w.entry(1, 1) - d).max(0.0),
            (w.entry(2, 2) - d).max(0.0),
            (w.entry(3, 3) - d).max(0.0),
        ];
        Ok(BlockForm::DiagonalPlusConstant { lam, d })
    } else {
        Ok(BlockForm::General {
            max_offdiag_spread: spread,
        })
    }
}

/// One scanned block: its 1-based indices, the detected base form, and the
/// residual on the composed kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub l: usize,
    pub indices: [usize; 3],
    pub form: BlockForm,
    pub residual: TripleResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockScanReport {
    pub blocks: Vec<BlockReport>,
    /// Trailing indices not covered by a complete triple.
    pub unscanned: Vec<usize>,
}

/// Recover a symmetric representative of the base block from composed
/// entries alone. If C = B + column shift f with B symmetric, then
/// C[j,k] - (C[i1,k] - C[k,i1]) = B[j,k] + f(i1): the base up to a constant,
/// which preserves both the form classification and domination.
pub(crate) fn reconstruct_base(entries: &dyn Fn(usize, usize) -> f64, idx: [usize; 3]) -> Kernel {
    let i1 = idx[0];
    let mut rows = Vec::with_capacity(3);
    for &j in &idx {
        let mut row = Vec::with_capacity(3);
        for &k in &idx {
            row.push(entries(j, k) - (entries(i1, k) - entries(k, i1)));
        }
        rows.push(row);
    }
    Kernel::from_rows(&rows).expect("3x3 block from finite entries")
}

/// Scan consecutive triples {3l+1, 3l+2, 3l+3} of a composed kernel.
///
/// When the base kernel is available its blocks are classified directly;
/// otherwise a symmetric representative is reconstructed from the composed
/// entries. Blocks whose representative is not symmetric within tolerance
/// are reported as `General` with the observed spread.
pub fn block_scan(composed: &Kernel, base: Option<&Kernel>, tol: f64) -> Result<BlockScanReport> {
    if let Some(b) = base {
        if b.n() != composed.n() {
            return Err(Error::DimensionMismatch {
                expected: composed.n(),
                got: b.n(),
            });
        }
    }
    let n = composed.n();
    let mut blocks = Vec::new();
    let mut l = 0usize;
    while 3 * l + 3 <= n {
        let idx = [3 * l + 1, 3 * l + 2, 3 * l + 3];
        let w = match base {
            Some(b) => {
                let f = |j: usize, k: usize| b.entry(j, k);
                reconstruct_base(&f, idx)
            }
            None => {
                let f = |j: usize, k: usize| composed.entry(j, k);
                reconstruct_base(&f, idx)
            }
        };
        let form = detect_form(&w, tol).unwrap_or(BlockForm::General {
            max_offdiag_spread: f64::INFINITY,
        });
        let residual = triple_residual(composed, idx[0], idx[1], idx[2])?;
        blocks.push(BlockReport {
            l,
            indices: idx,
            form,
            residual,
        });
        l += 1;
    }
    let unscanned = (3 * l + 1..=n).collect();
    Ok(BlockScanReport { blocks, unscanned })
}
