//! Tail scans: do the 3-cycle residuals stay nonzero arbitrarily far out,
//! or does some tail look diagonal-plus-constant all the way down?

use super::{detect_form, reconstruct_base, BlockForm, TripleResidual};
use crate::error::{Error, Result};
use crate::matrix::Kernel;
use crate::monotone::{MonotoneFn, SignedLog};
use serde::Serialize;

/// Spacings tried for equal-spacing triples (m, m+a, m+2a) at each threshold.
const SPACING_LADDER: [usize; 4] = [1, 2, 4, 8];

/// Cap on the downward refinement of a tail-start candidate.
const REFINE_CAP: usize = 4096;

/// An index-pair-evaluable kernel to scan. Materialized matrices and opaque
/// callbacks are evaluated entrywise; the two structured families carry
/// enough shape for residuals to be computed in factored sign/log form,
/// which stays exact far beyond where entrywise subtraction rounds to zero.
pub enum ScanSource {
    Kernel(Kernel),
    /// Pure 1-based evaluation (j, k) -> composed entry.
    Callback(Box<dyn Fn(usize, usize) -> Result<f64>>),
    /// entry(j,k) = exp(-lambda |j-k|) + f(k) on indices 1, 2, 3, ...
    ExpToeplitzPlusF {
        lambda: f64,
        f: MonotoneFn,
    },
    /// entry(j,k) = min(j,k) + f(k) on indices 1, 2, 3, ...
    MinPlusF {
        f: MonotoneFn,
    },
}

impl ScanSource {
    /// Largest scannable index, if bounded.
    fn max_index(&self) -> Option<usize> {
        match self {
            ScanSource::Kernel(k) => Some(k.n()),
            _ => None,
        }
    }

    fn entry(&self, j: usize, k: usize) -> Result<f64> {
        let v = match self {
            ScanSource::Kernel(m) => {
                let n = m.n();
                if j == 0 || j > n {
                    return Err(Error::IndexOutOfRange { index: j, n });
                }
                if k == 0 || k > n {
                    return Err(Error::IndexOutOfRange { index: k, n });
                }
                m.entry(j, k)
            }
            ScanSource::Callback(eval) => eval(j, k)?,
            ScanSource::ExpToeplitzPlusF { lambda, f } => {
                (-lambda * (j as f64 - k as f64).abs()).exp() + f.eval(k as f64)?
            }
            ScanSource::MinPlusF { f } => j.min(k) as f64 + f.eval(k as f64)?,
        };
        if !v.is_finite() {
            return Err(Error::EvalFailure {
                i: j,
                j: k,
                reason: format!("entry evaluated to {v}"),
            });
        }
        Ok(v)
    }

    fn is_structured(&self) -> bool {
        matches!(
            self,
            ScanSource::ExpToeplitzPlusF { .. } | ScanSource::MinPlusF { .. }
        )
    }

    /// Residual on the equal-spacing triple (m, m+a, m+2a), computed from the
    /// factored closed form. The factors are each sign-certain (monotonicity
    /// of f, strict decay of the base), so the sign is exact even when the
    /// value itself underflows.
    fn structured_residual(&self, m: usize, a: usize) -> Result<TripleResidual> {
        let (m1, m2, m3) = (m as f64, (m + a) as f64, (m + 2 * a) as f64);
        match self {
            ScanSource::ExpToeplitzPlusF { lambda, f } => {
                let af = a as f64;
                let u_a = (-lambda * af).exp();
                let u_2a = (-2.0 * lambda * af).exp();
                let (f1, f2, f3) = (f.eval(m1)?, f.eval(m2)?, f.eval(m3)?);
                let entries = [u_a + f2, u_a + f3, u_2a + f1, u_2a + f3, u_a + f2, u_a + f1];
                let ln_sum = positive_ln_sum(&entries, m)?;
                // F = (u(a) + f(m2)) (u(a) - u(2a)) (f(m1) - f(m3)).
                let common = SignedLog::from_value(u_a + f2);
                let mid = SignedLog {
                    sign: 1.0,
                    ln_mag: -lambda * af + (-(-lambda * af).exp_m1()).ln(),
                };
                let last = f.diff_log(m1, m3)?;
                let sl = common.mul(&mid).mul(&last);
                Ok(TripleResidual::from_parts(
                    (m, m + a, m + 2 * a),
                    sl.sign,
                    sl.ln_mag,
                    ln_sum,
                ))
            }
            ScanSource::MinPlusF { f } => {
                let (f1, f2, f3) = (f.eval(m1)?, f.eval(m2)?, f.eval(m3)?);
                let entries = [m1 + f2, m2 + f3, m1 + f1, m1 + f3, m2 + f2, m1 + f1];
                let ln_sum = positive_ln_sum(&entries, m)?;
                // F = (s1 + f(s1)) (s1 - s2) (f(s3) - f(s2)).
                let common = SignedLog::from_value(m1 + f1);
                let mid = SignedLog {
                    sign: -1.0,
                    ln_mag: (a as f64).ln(),
                };
                let fwd = f.diff_log(m2, m3)?; // f(m2) - f(m3)
                let last = SignedLog {
                    sign: -fwd.sign,
                    ln_mag: fwd.ln_mag,
                };
                let sl = common.mul(&mid).mul(&last);
                Ok(TripleResidual::from_parts(
                    (m, m + a, m + 2 * a),
                    sl.sign,
                    sl.ln_mag,
                    ln_sum,
                ))
            }
            _ => Err(Error::EvalFailure {
                i: m,
                j: a,
                reason: "factored residual requires a structured family".into(),
            }),
        }
    }
}

fn positive_ln_sum(entries: &[f64; 6], at: usize) -> Result<f64> {
    let mut s = 0.0;
    for &e in entries {
        if !e.is_finite() || e <= 0.0 {
            return Err(Error::EvalFailure {
                i: at,
                j: at,
                reason: format!("composed entry {e} is not strictly positive"),
            });
        }
        s += e.ln();
    }
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdWitness {
    pub threshold: usize,
    pub residual: TripleResidual,
}

/// Scan verdict over a threshold schedule.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum AsymptoticVerdict {
    /// Every threshold in the schedule produced a triple, entirely above it,
    /// with nonvanishing residual.
    NotAsymptoticallySymmetrizable {
        witnesses: Vec<ThresholdWitness>,
        scanned_up_to: usize,
    },
    /// Some tail exhausted the search cleanly and its blocks classify as
    /// diagonal-plus-constant. Finite-depth evidence, not a certificate.
    PossiblyAsymptoticallySymmetrizable {
        n0_candidate: usize,
        tail_form: BlockForm,
    },
    Inconclusive {
        reason: String,
    },
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    /// Increasing tail-start thresholds to test.
    pub schedule: Vec<usize>,
    /// How far past each threshold triples are searched.
    pub window: usize,
    /// Floor on |normalized residual| for entrywise witnesses.
    pub tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            schedule: vec![1, 10, 100, 1000],
            window: 64,
            tol: 1e-9,
        }
    }
}

enum ThresholdOutcome {
    Witnessed(TripleResidual),
    Clean,
    Unscannable,
}

/// Hunt for residual witnesses above every threshold in the schedule.
///
/// All thresholds witnessed: not asymptotically symmetrizable. A clean
/// suffix of the schedule whose blocks are all diagonal-plus-constant:
/// possibly symmetrizable, with the tail start refined downward to the
/// smallest threshold that still scans clean. Anything else: inconclusive.
pub fn asymptotic_scan(source: &ScanSource, cfg: &ScanConfig) -> Result<AsymptoticVerdict> {
    if cfg.schedule.is_empty() || cfg.schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parse(
            "schedule must be nonempty and increasing".into(),
        ));
    }
    if cfg.window < 3 {
        return Err(Error::Parse("window must be at least 3".into()));
    }
    let cap = source.max_index();
    let mut outcomes = Vec::with_capacity(cfg.schedule.len());
    for &m in &cfg.schedule {
        if cap.is_some_and(|n| m + 2 > n) {
            outcomes.push((m, ThresholdOutcome::Unscannable));
            continue;
        }
        let out = match find_witness(source, m, cfg)? {
            Some(r) => ThresholdOutcome::Witnessed(r),
            None => ThresholdOutcome::Clean,
        };
        outcomes.push((m, out));
    }

    let scannable: Vec<&(usize, ThresholdOutcome)> = outcomes
        .iter()
        .filter(|(_, o)| !matches!(o, ThresholdOutcome::Unscannable))
        .collect();
    if scannable.is_empty() {
        return Ok(AsymptoticVerdict::Inconclusive {
            reason: "kernel too small for every threshold in the schedule".into(),
        });
    }
    let all_witnessed = scannable
        .iter()
        .all(|(_, o)| matches!(o, ThresholdOutcome::Witnessed(_)));
    if all_witnessed {
        if scannable.len() < outcomes.len() {
            return Ok(AsymptoticVerdict::Inconclusive {
                reason: format!(
                    "witnesses at every scannable threshold, but the kernel dimension \
                     caps the schedule at {} of {} thresholds",
                    scannable.len(),
                    outcomes.len()
                ),
            });
        }
        let max_m = *cfg.schedule.last().expect("nonempty schedule");
        let witnesses = outcomes
            .into_iter()
            .map(|(m, o)| match o {
                ThresholdOutcome::Witnessed(r) => ThresholdWitness {
                    threshold: m,
                    residual: r,
                },
                _ => unreachable!("all thresholds witnessed"),
            })
            .collect();
        return Ok(AsymptoticVerdict::NotAsymptoticallySymmetrizable {
            witnesses,
            scanned_up_to: max_m + cfg.window,
        });
    }

    // Not all witnessed: look for a clean suffix of the scannable thresholds.
    let first_clean = scannable
        .iter()
        .position(|(_, o)| matches!(o, ThresholdOutcome::Clean))
        .expect("some scannable threshold is clean");
    let suffix_clean = scannable[first_clean..]
        .iter()
        .all(|(_, o)| matches!(o, ThresholdOutcome::Clean));
    if !suffix_clean {
        return Ok(AsymptoticVerdict::Inconclusive {
            reason: "residuals vanish at one threshold but reappear at a later one".into(),
        });
    }
    let m_star = scannable[first_clean].0;
    let tail_form = match classify_tail_blocks(source, m_star, cfg)? {
        Ok(form) => form,
        Err(reason) => return Ok(AsymptoticVerdict::Inconclusive { reason }),
    };
    let n0_candidate = refine_tail_start(source, m_star, cfg)?;
    Ok(AsymptoticVerdict::PossiblyAsymptoticallySymmetrizable {
        n0_candidate,
        tail_form,
    })
}

/// First triple with all indices >= m whose residual clears the floor;
/// contiguous triples first, then wider equal spacings.
fn find_witness(source: &ScanSource, m: usize, cfg: &ScanConfig) -> Result<Option<TripleResidual>> {
    let hi = match source.max_index() {
        Some(n) => n.min(m + cfg.window),
        None => m + cfg.window,
    };
    for a in SPACING_LADDER {
        if source.is_structured() {
            // One factored evaluation per spacing certifies sign exactly.
            let r = source.structured_residual(m, a)?;
            if r.sign != 0 {
                return Ok(Some(r));
            }
            continue;
        }
        let mut j = m;
        while j + 2 * a <= hi {
            let r = entrywise_residual(source, j, a)?;
            if r.normalized.abs() > cfg.tol {
                return Ok(Some(r));
            }
            j += 1;
        }
    }
    Ok(None)
}

fn entrywise_residual(source: &ScanSource, j: usize, a: usize) -> Result<TripleResidual> {
    let (i1, i2, i3) = (j, j + a, j + 2 * a);
    let pairs = [(i1, i2), (i2, i3), (i3, i1), (i1, i3), (i3, i2), (i2, i1)];
    let mut vals = [0.0f64; 6];
    for (slot, &(r, c)) in vals.iter_mut().zip(pairs.iter()) {
        let e = source.entry(r, c)?;
        if e <= 0.0 {
            return Err(Error::NonpositiveEntry { row: r, col: c });
        }
        *slot = e;
    }
    let fwd = vals[0] * vals[1] * vals[2];
    let rev = vals[3] * vals[4] * vals[5];
    let value = fwd - rev;
    let ln_sum: f64 = vals.iter().map(|v| v.ln()).sum();
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

/// Classify contiguous blocks in [m, m+window]; Ok(form) when all are
/// diagonal-plus-constant (returning the last block's form), Err(reason)
/// otherwise.
fn classify_tail_blocks(
    source: &ScanSource,
    m: usize,
    cfg: &ScanConfig,
) -> Result<std::result::Result<BlockForm, String>> {
    let hi = match source.max_index() {
        Some(n) => n.min(m + cfg.window),
        None => m + cfg.window,
    };
    let mut form = None;
    let mut start = m;
    while start + 2 <= hi {
        let idx = [start, start + 1, start + 2];
        let mut grid = [[0.0f64; 3]; 3];
        for (r, &j) in idx.iter().enumerate() {
            for (c, &k) in idx.iter().enumerate() {
                grid[r][c] = source.entry(j, k)?;
            }
        }
        let local = move |j: usize, k: usize| {
            let r = idx.iter().position(|&i| i == j).expect("index in block");
            let c = idx.iter().position(|&i| i == k).expect("index in block");
            grid[r][c]
        };
        let rep = reconstruct_base(&local, idx);
        match detect_form(&rep, cfg.tol.max(super::FORM_TOL)) {
            Ok(BlockForm::DiagonalPlusConstant { lam, d }) => {
                form = Some(BlockForm::DiagonalPlusConstant { lam, d });
            }
            Ok(BlockForm::General { max_offdiag_spread }) => {
                return Ok(Err(format!(
                    "tail residuals vanish but block at {start} is not \
                     diagonal-plus-constant (off-diagonal spread {max_offdiag_spread:.3e})"
                )));
            }
            Err(e) => {
                return Ok(Err(format!(
                    "tail block at {start} failed form detection: {e}"
                )));
            }
        }
        start += 3;
    }
    match form {
        Some(f) => Ok(Ok(f)),
        None => Ok(Err("tail window too small to classify any block".into())),
    }
}

/// Walk the clean tail start downward to the smallest index that still scans
/// clean; linear, capped.
fn refine_tail_start(source: &ScanSource, m_star: usize, cfg: &ScanConfig) -> Result<usize> {
    let mut m = m_star;
    let mut steps = 0;
    while m > 1 && steps < REFINE_CAP {
        if find_witness(source, m - 1, cfg)?.is_some() {
            break;
        }
        m -= 1;
        steps += 1;
    }
    Ok(m)
}
