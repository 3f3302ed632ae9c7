//! Deciding whether a kernel K admits a symmetric Q with
//! |I + K diag(s)| = |I + Q diag(s)| for every positive diagonal.
//!
//! For strictly positive kernels the decision pipeline is: 3-cycle products
//! anchored at index 1, then the explicit diagonal scaling recovered from
//! ratio square roots, then a randomized determinant-identity test as
//! confirmation. Each stage maps onto a necessary condition that the
//! equivalence forces on principal minors, diagonals, opposite-entry
//! products and 3-cycles.

use crate::error::{Error, Result};
use crate::matrix::{det_i_plus_ks, DiagonalScaling, IndexSet, Kernel};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default tolerance for relative comparisons in this module.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Violations within this factor of the tolerance are treated as borderline
/// and produce `Indeterminate` rather than a hard rejection.
pub const BORDERLINE_FACTOR: f64 = 10.0;

/// Trials used by the confirmation run inside [`symmetrizable`].
pub const CONFIRM_TRIALS: usize = 64;

/// Tolerance for the randomized determinant-identity comparison.
pub const PIT_TOL: f64 = 1e-8;

/// Outcome of the full symmetrizability decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SymmetrizabilityVerdict {
    Symmetrizable {
        scaling: DiagonalScaling,
        #[serde(with = "crate::matrix::rows_serde")]
        qtilde: Kernel,
    },
    NotSymmetrizable {
        witness: CycleWitness,
    },
    Indeterminate {
        reason: String,
    },
}

/// A 3-cycle whose forward and reverse entry products disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleWitness {
    /// 1-based triple (i1, i2, i3).
    pub triple: (usize, usize, usize),
    /// K_{i1,i2} K_{i2,i3} K_{i3,i1}.
    pub forward: f64,
    /// K_{i1,i3} K_{i3,i2} K_{i2,i1}.
    pub reverse: f64,
}

impl CycleWitness {
    /// Relative disagreement |forward - reverse| / max(|forward|, |reverse|).
    pub fn violation(&self) -> f64 {
        let scale = self.forward.abs().max(self.reverse.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.forward - self.reverse).abs() / scale
        }
    }
}

/// Result of scanning 3-cycles.
#[derive(Debug, Clone, PartialEq)]
pub enum CycleOutcome {
    Pass,
    /// The strongest violating triple found.
    Violation(CycleWitness),
}

/// Which triangles a cycle scan visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleScan {
    /// Triangles (1, j, k) only; sufficient for strictly positive kernels
    /// because every cycle factors through anchored ones.
    Anchored,
    /// Every distinct triple; diagnostic use.
    Full,
}

/// Per-condition report of the necessary checks relating K to a claimed
/// symmetric equivalent Q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryReport {
    /// Principal minors agree for all index sets with |I| <= 3 and the full set.
    pub minors_ok: bool,
    /// Diagonals agree entrywise.
    pub diagonal_ok: bool,
    /// Q_{jk}^2 = K_{jk} K_{kj} for all pairs.
    pub offdiag_product_ok: bool,
    /// 3-cycle products of K are orientation independent.
    pub cycles_ok: bool,
    pub worst_violation: Option<ConditionViolation>,
}

impl NecessaryReport {
    pub fn all_ok(&self) -> bool {
        self.minors_ok && self.diagonal_ok && self.offdiag_product_ok && self.cycles_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionViolation {
    /// Which condition family failed: "minor", "diagonal", "offdiag_product", "cycle".
    pub condition: String,
    /// 1-based indices involved.
    pub indices: Vec<usize>,
    /// Relative magnitude of the disagreement.
    pub magnitude: f64,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Check the necessary conditions linking K to a symmetric Q: equal principal
/// minors (all |I| <= 3 plus the full set), equal diagonals, opposite-entry
/// products matching Q^2, and orientation-independent 3-cycles of K.
pub fn check_necessary(k: &Kernel, q: &Kernel, tol: f64) -> Result<NecessaryReport> {
    if k.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: k.n(),
            got: q.n(),
        });
    }
    let qasym = q.asymmetry();
    if qasym > tol {
        return Err(Error::NotSymmetric {
            row: 0,
            col: 0,
            deviation: qasym,
        });
    }
    let n = k.n();
    let mut worst: Option<ConditionViolation> = None;
    let mut bump = |condition: &str, indices: Vec<usize>, magnitude: f64| {
        if magnitude > worst.as_ref().map_or(0.0, |w| w.magnitude) {
            worst = Some(ConditionViolation {
                condition: condition.to_string(),
                indices,
                magnitude,
            });
        }
    };

    let mut minors_ok = true;
    let mut check_minor = |idx: Vec<usize>, bump: &mut dyn FnMut(&str, Vec<usize>, f64)| {
        let set = IndexSet::new(idx.clone()).expect("generated index sets are valid");
        let dk = k.principal_submatrix(&set).expect("in range").det();
        let dq = q.principal_submatrix(&set).expect("in range").det();
        let gap = rel_gap(dk, dq);
        if gap > tol {
            minors_ok = false;
            bump("minor", idx, gap);
        }
    };

    for i in 1..=n {
        check_minor(vec![i], &mut bump);
    }
    for i in 1..=n {
        for j in (i + 1)..=n {
            check_minor(vec![i, j], &mut bump);
        }
    }
    for i in 1..=n {
        for j in (i + 1)..=n {
            for l in (j + 1)..=n {
                check_minor(vec![i, j, l], &mut bump);
            }
        }
    }
    if n > 3 {
        check_minor((1..=n).collect(), &mut bump);
    }

    let mut diagonal_ok = true;
    for i in 1..=n {
        let gap = rel_gap(k.entry(i, i), q.entry(i, i));
        if gap > tol {
            diagonal_ok = false;
            bump("diagonal", vec![i], gap);
        }
    }

    // Compare Q_{jk}^2 with K_{jk} K_{kj}: equivalent to |Q_{jk}| being the
    // geometric mean, but defined even when the product goes negative.
    let mut offdiag_product_ok = true;
    for j in 1..=n {
        for l in (j + 1)..=n {
            let lhs = q.entry(j, l) * q.entry(j, l);
            let rhs = k.entry(j, l) * k.entry(l, j);
            let gap = rel_gap(lhs, rhs);
            if gap > tol {
                offdiag_product_ok = false;
                bump("offdiag_product", vec![j, l], gap);
            }
        }
    }

    let mut cycles_ok = true;
    for i in 1..=n {
        for j in (i + 1)..=n {
            for l in (j + 1)..=n {
                let w = cycle_witness(k, i, j, l);
                let gap = w.violation();
                if gap > tol {
                    cycles_ok = false;
                    bump("cycle", vec![i, j, l], gap);
                }
            }
        }
    }

    Ok(NecessaryReport {
        minors_ok,
        diagonal_ok,
        offdiag_product_ok,
        cycles_ok,
        worst_violation: worst,
    })
}

fn cycle_witness(k: &Kernel, i1: usize, i2: usize, i3: usize) -> CycleWitness {
    CycleWitness {
        triple: (i1, i2, i3),
        forward: k.entry(i1, i2) * k.entry(i2, i3) * k.entry(i3, i1),
        reverse: k.entry(i1, i3) * k.entry(i3, i2) * k.entry(i2, i1),
    }
}

/// Scan 3-cycles of a strictly positive kernel for orientation dependence.
///
/// Returns the strongest violating triangle (not merely the first one past
/// the tolerance) so that callers can distinguish borderline from decisive
/// failures. Kernels with a nonpositive entry are rejected.
pub fn cycle_condition(k: &Kernel, tol: f64, scan: CycleScan) -> Result<CycleOutcome> {
    for i in 1..=k.n() {
        for j in 1..=k.n() {
            if k.entry(i, j) <= 0.0 {
                return Err(Error::NonpositiveEntry { row: i, col: j });
            }
        }
    }
    let n = k.n();
    let mut worst: Option<CycleWitness> = None;
    let mut consider = |w: CycleWitness| {
        if w.violation() > worst.as_ref().map_or(0.0, |b| b.violation()) {
            worst = Some(w);
        }
    };
    match scan {
        CycleScan::Anchored => {
            for j in 2..=n {
                for l in (j + 1)..=n {
                    consider(cycle_witness(k, 1, j, l));
                }
            }
        }
        CycleScan::Full => {
            for i in 1..=n {
                for j in (i + 1)..=n {
                    for l in (j + 1)..=n {
                        consider(cycle_witness(k, i, j, l));
                    }
                }
            }
        }
    }
    match worst {
        Some(w) if w.violation() > tol => Ok(CycleOutcome::Violation(w)),
        _ => Ok(CycleOutcome::Pass),
    }
}

/// Recover the diagonal scaling that symmetrizes a strictly positive kernel
/// passing the cycle condition: Lambda_1 = 1, Lambda_j = sqrt(K_1j / K_j1).
///
/// The conjugation Lambda K Lambda^(-1) is verified to be symmetric within
/// tol before returning.
pub fn find_scaling(k: &Kernel, tol: f64) -> Result<DiagonalScaling> {
    match cycle_condition(k, tol, CycleScan::Anchored)? {
        CycleOutcome::Pass => {}
        CycleOutcome::Violation(w) => {
            return Err(Error::CycleViolation {
                i1: w.triple.0,
                i2: w.triple.1,
                i3: w.triple.2,
                forward: w.forward,
                reverse: w.reverse,
            })
        }
    }
    let n = k.n();
    let mut diag = Vec::with_capacity(n);
    diag.push(1.0);
    for j in 2..=n {
        diag.push((k.entry(1, j) / k.entry(j, 1)).sqrt());
    }
    let scaling = DiagonalScaling::new(diag)?;
    let conj = scaling.conjugate(k)?;
    let asym = conj.asymmetry();
    if asym > tol {
        return Err(Error::NotSymmetric {
            row: 0,
            col: 0,
            deviation: asym,
        });
    }
    Ok(scaling)
}

/// The entrywise geometric-mean symmetrization sqrt(K_jk K_kj); for a
/// symmetrizable positive kernel this is the symmetric equivalent itself.
pub fn qtilde(k: &Kernel) -> Result<Kernel> {
    let n = k.n();
    let mut entries = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            let p = k.entry(i, j) * k.entry(j, i);
            if p < 0.0 {
                return Err(Error::NonpositiveEntry { row: i, col: j });
            }
            entries.push(p.sqrt());
        }
    }
    Kernel::from_flat(n, entries)
}

/// Randomized determinant-identity test: draw diagonal scalings s with
/// entries uniform on (0, 2] and compare |I + K diag(s)| with |I + Q diag(s)|.
///
/// Trial t draws from an independent substream of the seeded generator, so
/// results are reproducible for fixed (seed, trials) no matter how trials are
/// partitioned across workers.
pub fn pit_equivalence(k: &Kernel, q: &Kernel, trials: usize, seed: u64, tol: f64) -> Result<bool> {
    if k.n() != q.n() {
        return Err(Error::DimensionMismatch {
            expected: k.n(),
            got: q.n(),
        });
    }
    let n = k.n();
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        // 2 - U[0,2) lands in (0, 2].
        let s: Vec<f64> = (0..n).map(|_| 2.0 - rng.random_range(0.0..2.0)).collect();
        let dk = det_i_plus_ks(k, &s);
        let dq = det_i_plus_ks(q, &s);
        if (dk - dq).abs() > tol * (1.0 + dk.abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Seed derived deterministically from the kernel entries, used for the
/// confirmation trials inside [`symmetrizable`].
fn derived_seed(k: &Kernel) -> u64 {
    // FNV-1a over the entry bit patterns and the dimension.
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(k.n() as u64);
    for &v in k.flat() {
        eat(v.to_bits());
    }
    h
}

/// Full decision for a strictly positive kernel.
///
/// Cycle violations beyond 10x the tolerance reject; violations inside the
/// borderline band, nonpositive entries, and failed confirmation runs all
/// return `Indeterminate` rather than guessing.
pub fn symmetrizable(k: &Kernel, tol: f64) -> SymmetrizabilityVerdict {
    if !k.strictly_positive() {
        return SymmetrizabilityVerdict::Indeterminate {
            reason: "kernel has nonpositive entries; the cycle test applies to strictly positive kernels".into(),
        };
    }
    let outcome = match cycle_condition(k, tol, CycleScan::Anchored) {
        Ok(o) => o,
        Err(e) => {
            return SymmetrizabilityVerdict::Indeterminate {
                reason: e.to_string(),
            }
        }
    };
    match outcome {
        CycleOutcome::Violation(w) => {
            if w.violation() > BORDERLINE_FACTOR * tol {
                SymmetrizabilityVerdict::NotSymmetrizable { witness: w }
            } else {
                SymmetrizabilityVerdict::Indeterminate {
                    reason: format!(
                        "cycle violation {:.3e} at ({},{},{}) is within {}x of tolerance {:.1e}",
                        w.violation(),
                        w.triple.0,
                        w.triple.1,
                        w.triple.2,
                        BORDERLINE_FACTOR,
                        tol
                    ),
                }
            }
        }
        CycleOutcome::Pass => {
            let scaling = match find_scaling(k, tol.max(1e-12)) {
                Ok(s) => s,
                Err(e) => {
                    return SymmetrizabilityVerdict::Indeterminate {
                        reason: format!("cycles pass but no consistent scaling: {e}"),
                    }
                }
            };
            let qt = match qtilde(k) {
                Ok(q) => q,
                Err(e) => {
                    return SymmetrizabilityVerdict::Indeterminate {
                        reason: format!("geometric-mean symmetrization failed: {e}"),
                    }
                }
            };
            match pit_equivalence(k, &qt, CONFIRM_TRIALS, derived_seed(k), PIT_TOL) {
                Ok(true) => SymmetrizabilityVerdict::Symmetrizable {
                    scaling,
                    qtilde: qt,
                },
                Ok(false) => SymmetrizabilityVerdict::Indeterminate {
                    reason: "cycle condition passed but the determinant identity test failed; \
                             3-cycle agreement is not conclusive at this dimension"
                        .into(),
                },
                Err(e) => SymmetrizabilityVerdict::Indeterminate {
                    reason: format!("determinant identity test failed to run: {e}"),
                },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k_rank_one() -> Kernel {
        Kernel::from_rows(&[vec![2.0, 1.0], vec![4.0, 2.0]]).unwrap()
    }

    #[test]
    fn necessary_passes_on_equivalent_pair() {
        let q = Kernel::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let rep = check_necessary(&k_rank_one(), &q, 1e-9).unwrap();
        assert!(rep.all_ok());
        assert!(rep.worst_violation.is_none());
    }

    #[test]
    fn necessary_flags_diagonal_mismatch() {
        let q = Kernel::from_rows(&[vec![2.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let rep = check_necessary(&k_rank_one(), &q, 1e-9).unwrap();
        assert!(!rep.diagonal_ok);
        let w = rep.worst_violation.unwrap();
        assert!(!rep.minors_ok || w.condition == "diagonal");
    }

    #[test]
    fn necessary_rejects_asymmetric_q() {
        let q = Kernel::from_rows(&[vec![2.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(check_necessary(&k_rank_one(), &q, 1e-9).is_err());
    }

    #[test]
    fn cycle_finds_the_unbalanced_triangle() {
        let k = Kernel::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        match cycle_condition(&k, 1e-9, CycleScan::Anchored).unwrap() {
            CycleOutcome::Violation(w) => {
                assert_eq!(w.triple, (1, 2, 3));
                assert_eq!(w.forward, 1.0);
                assert_eq!(w.reverse, 2.0);
            }
            CycleOutcome::Pass => panic!("expected a violation"),
        }
    }

    #[test]
    fn cycle_passes_symmetric() {
        let k = Kernel::from_rows(&[
            vec![2.0, 1.0, 0.5],
            vec![1.0, 2.0, 1.0],
            vec![0.5, 1.0, 2.0],
        ])
        .unwrap();
        assert_eq!(
            cycle_condition(&k, 1e-9, CycleScan::Full).unwrap(),
            CycleOutcome::Pass
        );
    }

    #[test]
    fn cycle_rejects_nonpositive_entries() {
        let k = Kernel::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            cycle_condition(&k, 1e-9, CycleScan::Anchored),
            Err(Error::NonpositiveEntry { row: 1, col: 2 })
        ));
    }

    #[test]
    fn scaling_recovers_rank_one_example() {
        let lam = find_scaling(&k_rank_one(), 1e-9).unwrap();
        assert_eq!(lam.diag(), &[1.0, 0.5]);
        let conj = lam.conjugate(&k_rank_one()).unwrap();
        assert_relative_eq!(conj.entry(1, 2), 2.0, max_relative = 1e-14);
        assert_relative_eq!(conj.entry(2, 1), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn scaling_refuses_cycle_violations() {
        let k = Kernel::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            find_scaling(&k, 1e-9),
            Err(Error::CycleViolation { .. })
        ));
    }

    #[test]
    fn pit_accepts_conjugated_pair() {
        let q = Kernel::from_rows(&[
            vec![2.0, 0.8, 0.3],
            vec![0.8, 1.5, 0.6],
            vec![0.3, 0.6, 1.9],
        ])
        .unwrap();
        let lam = DiagonalScaling::new(vec![1.0, 3.0, 0.2]).unwrap();
        let k = lam.conjugate(&q).unwrap();
        assert!(pit_equivalence(&k, &q, 64, 42, 1e-8).unwrap());
    }

    #[test]
    fn pit_rejects_cycle_violator_against_its_geometric_mean() {
        let k = Kernel::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let qt = qtilde(&k).unwrap();
        assert!(!pit_equivalence(&k, &qt, 64, 42, 1e-8).unwrap());
    }

    #[test]
    fn pit_is_deterministic_in_the_seed() {
        let k = k_rank_one();
        let q = Kernel::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let a = pit_equivalence(&k, &q, 32, 7, 1e-8).unwrap();
        let b = pit_equivalence(&k, &q, 32, 7, 1e-8).unwrap();
        assert_eq!(a, b);
        assert!(a);
    }

    #[test]
    fn verdict_symmetrizable_for_conjugated_symmetric() {
        let q = Kernel::from_rows(&[
            vec![2.0, 0.8, 0.3],
            vec![0.8, 1.5, 0.6],
            vec![0.3, 0.6, 1.9],
        ])
        .unwrap();
        let lam = DiagonalScaling::new(vec![1.0, 3.0, 0.2]).unwrap();
        let k = lam.conjugate(&q).unwrap();
        match symmetrizable(&k, DEFAULT_TOL) {
            SymmetrizabilityVerdict::Symmetrizable { scaling, qtilde } => {
                // k = lam Q lam^{-1}, so the symmetrizing conjugation is by
                // 1/lam; witnesses are unique up to a global factor and ours
                // anchors index 1.
                for (a, b) in scaling.diag().iter().zip(lam.diag()) {
                    assert_relative_eq!(
                        a / scaling.diag()[0],
                        lam.diag()[0] / b,
                        max_relative = 1e-10
                    );
                }
                let conj = scaling.conjugate(&k).unwrap();
                assert!(conj.asymmetry() <= 1e-10);
                for i in 1..=3 {
                    for j in 1..=3 {
                        assert_relative_eq!(
                            qtilde.entry(i, j),
                            q.entry(i, j),
                            max_relative = 1e-10
                        );
                    }
                }
            }
            other => panic!("expected symmetrizable, got {other:?}"),
        }
    }

    #[test]
    fn verdict_rejects_unbalanced_cycle() {
        let k = Kernel::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        match symmetrizable(&k, DEFAULT_TOL) {
            SymmetrizabilityVerdict::NotSymmetrizable { witness } => {
                assert_eq!(witness.triple, (1, 2, 3));
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn verdict_indeterminate_on_nonpositive_entries() {
        let k = Kernel::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            symmetrizable(&k, DEFAULT_TOL),
            SymmetrizabilityVerdict::Indeterminate { .. }
        ));
    }

    #[test]
    fn verdict_json_shapes() {
        let k = Kernel::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let v = symmetrizable(&k, DEFAULT_TOL);
        let j: serde_json::Value = serde_json::to_value(&v).unwrap();
        assert_eq!(j["verdict"], "not_symmetrizable");
        assert_eq!(j["witness"]["triple"][0], 1);

        let sym = symmetrizable(
            &Kernel::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap(),
            DEFAULT_TOL,
        );
        let j: serde_json::Value = serde_json::to_value(&sym).unwrap();
        assert_eq!(j["verdict"], "symmetrizable");
        assert!(j["scaling"].is_array());
        assert_eq!(j["qtilde"][0][1], 0.5);
    }
}
