//! Tail form test along a sequence of points accumulating at a limit point.
//!
//! If the kernel restricted to {x_j : j >= n0} had diagonal-plus-constant
//! form, its off-diagonal values would be a single constant d, and the gap
//! u(x0,x0) - u(x_j,x0) a single constant Lambda0 > 0 — which continuity at
//! the limit point forces to 0. The checker evaluates both failure channels
//! per candidate n0 and reports which one fired.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct LimitPointConfig {
    /// Candidate tail starts 1..=n0_max are each tested.
    pub n0_max: usize,
    /// Number of sequence points sampled past each candidate start.
    pub window: usize,
    pub tol: f64,
}

impl Default for LimitPointConfig {
    fn default() -> Self {
        LimitPointConfig {
            n0_max: 50,
            window: 16,
            tol: 1e-6,
        }
    }
}

/// How the diagonal-plus-constant tail hypothesis failed (or what it forced).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TailOutcome {
    /// Off-diagonal entries in the tail are not a single constant.
    OffDiagonalSpread { spread: f64 },
    /// Off-diagonals are constant but the gap to the limit point is not.
    GapNonconstant { gap_first: f64, gap_last: f64 },
    /// The form holds with a strictly positive gap — contradicting the
    /// continuity requirement that the gap vanish at the limit point.
    LambdaPositive { lambda0: f64, d: f64 },
    /// Nothing failed at this tolerance (no contradiction witnessed).
    FormAdmissible,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailCheck {
    pub n0: usize,
    #[serde(flatten)]
    pub outcome: TailOutcome,
    /// Gap u(x0,x0) - u(x_j,x0) at the first and last sampled j, reported
    /// for every candidate so the vanishing trend is visible in the output.
    pub lambda0_first: f64,
    pub lambda0_last: f64,
    pub form_fails: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitPointReport {
    pub x0: f64,
    pub u00: f64,
    pub checks: Vec<TailCheck>,
    /// True when every candidate tail start produced a contradiction.
    pub all_fail: bool,
}

/// Test every tail start n0 = 1..=n0_max of a point sequence converging to
/// x0 against the diagonal-plus-constant form.
///
/// Preconditions checked: points distinct from x0 with nonincreasing
/// distance to it (convergence surrogate), u(x_j, x0) < u(x0, x0) strictly
/// for every supplied point, and u(x_j, x_j) -> u(x0, x0) along the sequence.
pub fn limit_point_check(
    points: &[f64],
    x0: f64,
    u: &dyn Fn(f64, f64) -> f64,
    cfg: &LimitPointConfig,
) -> Result<LimitPointReport> {
    let needed = cfg.n0_max + cfg.window;
    if points.len() < needed {
        return Err(Error::NotEnoughPoints {
            needed,
            got: points.len(),
        });
    }
    if cfg.n0_max == 0 || cfg.window < 2 {
        return Err(Error::Parse("need n0_max >= 1 and window >= 2".into()));
    }
    let u00 = u(x0, x0);
    if !u00.is_finite() {
        return Err(Error::EvalFailure {
            i: 0,
            j: 0,
            reason: format!("u(x0,x0) = {u00}"),
        });
    }
    let mut prev_dist = f64::INFINITY;
    for &p in points {
        let dist = (p - x0).abs();
        if dist == 0.0 || dist > prev_dist {
            return Err(Error::PointsNotIncreasing);
        }
        prev_dist = dist;
        let v = u(p, x0);
        if !(v < u00) {
            return Err(Error::LimitPointHypothesis {
                y: p,
                value: v,
                diag: u00,
            });
        }
    }
    let last = *points.last().expect("nonempty");
    let cont_dev = (u(last, last) - u00).abs();
    if cont_dev > cfg.tol * (1.0 + u00.abs()) {
        return Err(Error::ContinuityViolation {
            deviation: cont_dev,
        });
    }

    let mut checks = Vec::with_capacity(cfg.n0_max);
    let mut all_fail = true;
    for n0 in 1..=cfg.n0_max {
        let idx: Vec<usize> = (n0..n0 + cfg.window).collect(); // 1-based into points
        let mut off = Vec::new();
        for t in 1..idx.len() {
            off.push(u(points[idx[0] - 1], points[idx[t] - 1]));
            off.push(u(points[idx[t - 1] - 1], points[idx[t] - 1]));
        }
        let hi = off.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = off.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = hi - lo;
        let d_est = off.iter().sum::<f64>() / off.len() as f64;
        let gap_first = u00 - u(points[idx[0] - 1], x0);
        let gap_last = u00 - u(points[*idx.last().expect("window >= 2") - 1], x0);
        let tol = cfg.tol * (1.0 + u00.abs());
        let outcome = if spread > tol {
            TailOutcome::OffDiagonalSpread { spread }
        } else if (gap_first - gap_last).abs() > tol {
            TailOutcome::GapNonconstant {
                gap_first,
                gap_last,
            }
        } else if gap_first > tol {
            TailOutcome::LambdaPositive {
                lambda0: gap_first,
                d: d_est,
            }
        } else {
            TailOutcome::FormAdmissible
        };
        let form_fails = !matches!(outcome, TailOutcome::FormAdmissible);
        all_fail &= form_fails;
        checks.push(TailCheck {
            n0,
            outcome,
            lambda0_first: gap_first,
            lambda0_last: gap_last,
            form_fails,
        });
    }
    Ok(LimitPointReport {
        x0,
        u00,
        checks,
        all_fail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recip_points(n: usize) -> Vec<f64> {
        (1..=n).map(|k| 1.0 / k as f64).collect()
    }

    #[test]
    fn exp_kernel_fails_form_at_every_tail_start() {
        let pts = recip_points(120);
        let u = |x: f64, y: f64| (-(x - y).abs()).exp();
        let cfg = LimitPointConfig {
            n0_max: 50,
            window: 16,
            tol: 1e-6,
        };
        let rep = limit_point_check(&pts, 0.0, &u, &cfg).unwrap();
        assert!(rep.all_fail);
        assert_eq!(rep.checks.len(), 50);
        for c in &rep.checks {
            assert!(
                matches!(c.outcome, TailOutcome::OffDiagonalSpread { spread } if spread > 1e-6),
                "n0 = {}: {:?}",
                c.n0,
                c.outcome
            );
            assert!(c.lambda0_first > 0.0);
            assert!(c.lambda0_last < c.lambda0_first);
        }
    }

    #[test]
    fn constant_kernel_violates_hypothesis() {
        let pts = recip_points(80);
        let u = |_: f64, _: f64| 1.0;
        let err = limit_point_check(&pts, 0.0, &u, &LimitPointConfig::default()).unwrap_err();
        assert!(matches!(err, Error::LimitPointHypothesis { .. }));
    }

    #[test]
    fn exact_dpc_kernel_reports_positive_lambda() {
        // u(x,y) = d off the diagonal, lam + d on it; the form holds, so the
        // contradiction must come from the strictly positive gap.
        let (lam, d) = (0.5, 0.25);
        let pts = recip_points(80);
        let u = move |x: f64, y: f64| if x == y { lam + d } else { d };
        let cfg = LimitPointConfig {
            n0_max: 10,
            window: 8,
            tol: 1e-6,
        };
        let rep = limit_point_check(&pts, 0.0, &u, &cfg).unwrap();
        assert!(rep.all_fail);
        for c in &rep.checks {
            match c.outcome {
                TailOutcome::LambdaPositive { lambda0, d: dd } => {
                    assert!((lambda0 - lam).abs() < 1e-12);
                    assert!((dd - d).abs() < 1e-12);
                }
                ref other => panic!(
                    "n0 = {}: expected positive-gap outcome, got {other:?}",
                    c.n0
                ),
            }
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let pts = recip_points(10);
        let u = |x: f64, y: f64| (-(x - y).abs()).exp();
        assert!(matches!(
            limit_point_check(&pts, 0.0, &u, &LimitPointConfig::default()),
            Err(Error::NotEnoughPoints { .. })
        ));
    }
}
