//! Kernel constructors: exponential-Toeplitz and min kernels on point sets,
//! diagonal-plus-constant matrices, random inverse-M-matrix potentials, and
//! column perturbations U_jk + f_k.

pub mod family;

use crate::error::{Error, Result};
use crate::matrix::Kernel;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Relative tolerance for the symmetry of stored potentials.
pub const POTENTIAL_SYMMETRY_TOL: f64 = 1e-12;

/// Default diagonal-dominance margin for random generators.
pub const DEFAULT_DOMINANCE: f64 = 0.1;

const MAX_POTENTIAL_RETRIES: usize = 16;

/// K_jk = exp(-lambda |p_j - p_k|) on strictly increasing points, which are
/// kept as labels.
pub fn exp_toeplitz(points: &[f64], lambda: f64) -> Result<Kernel> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidDecayRate);
    }
    check_increasing(points)?;
    let n = points.len();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push((-lambda * (points[i] - points[j]).abs()).exp());
        }
    }
    Kernel::from_flat(n, entries)?.with_labels(points.to_vec())
}

/// K_jk = min(p_j, p_k) on strictly increasing, strictly positive points.
pub fn min_kernel(points: &[f64]) -> Result<Kernel> {
    check_increasing(points)?;
    if points[0] <= 0.0 {
        return Err(Error::PointsNotPositive);
    }
    let n = points.len();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            entries.push(points[i.min(j)]);
        }
    }
    Kernel::from_flat(n, entries)?.with_labels(points.to_vec())
}

/// U_jk = lam_j delta_jk + d, with lam_j >= 0, d >= 0 and no all-zero row.
pub fn diag_plus_constant(lam: &[f64], d: f64) -> Result<Kernel> {
    if lam.is_empty() {
        return Err(Error::InvalidDiagPlusConstant {
            reason: "empty diagonal".into(),
        });
    }
    if !d.is_finite() || d < 0.0 {
        return Err(Error::InvalidDiagPlusConstant {
            reason: format!("constant part must be finite and nonnegative, got {d}"),
        });
    }
    for (j, &l) in lam.iter().enumerate() {
        if !l.is_finite() || l < 0.0 {
            return Err(Error::InvalidDiagPlusConstant {
                reason: format!("lam[{}] = {l} must be finite and nonnegative", j + 1),
            });
        }
        if l == 0.0 && d == 0.0 {
            return Err(Error::InvalidDiagPlusConstant {
                reason: format!("row {} would be identically zero", j + 1),
            });
        }
    }
    let n = lam.len();
    let mut entries = vec![d; n * n];
    for j in 0..n {
        entries[j * n + j] += lam[j];
    }
    Kernel::from_flat(n, entries)
}

fn check_increasing(points: &[f64]) -> Result<()> {
    if points.is_empty()
        || points.iter().any(|p| !p.is_finite())
        || points.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::PointsNotIncreasing);
    }
    Ok(())
}

/// A symmetric potential matrix U = A^(-1) together with its generator A,
/// a diagonally dominant symmetric M-matrix with nonnegative row sums.
///
/// Such a U is entrywise positive, symmetric, and dominated by its diagonal:
/// U_jk <= min(U_jj, U_kk).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPotential {
    u: Kernel,
    generator: Kernel,
}

impl SymmetricPotential {
    pub fn n(&self) -> usize {
        self.u.n()
    }

    pub fn u(&self) -> &Kernel {
        &self.u
    }

    pub fn generator(&self) -> &Kernel {
        &self.generator
    }

    pub fn into_kernel(self) -> Kernel {
        self.u
    }

    /// Column perturbation of this potential; see [`perturb`].
    pub fn perturb(&self, f: &[f64]) -> Result<PerturbedKernel> {
        perturb(self.u.clone(), f)
    }
}

/// Build the potential U = A^(-1) from a generator A, validating the
/// generator (symmetric M-matrix, positive diagonal, nonnegative row sums)
/// and the resulting U (strictly positive, symmetric, diagonal-dominated).
pub fn potential_from_generator(a: Kernel) -> Result<SymmetricPotential> {
    let n = a.n();
    let scale = a.scale().max(f64::MIN_POSITIVE);
    let asym = a.asymmetry();
    if asym > POTENTIAL_SYMMETRY_TOL {
        return Err(Error::InvalidGenerator {
            reason: format!("generator asymmetry {asym:.3e}"),
        });
    }
    for i in 1..=n {
        if a.entry(i, i) <= 0.0 {
            return Err(Error::InvalidGenerator {
                reason: format!("diagonal entry {i} is not positive"),
            });
        }
        for j in 1..=n {
            if i != j && a.entry(i, j) > 0.0 {
                return Err(Error::InvalidGenerator {
                    reason: format!("off-diagonal ({i},{j}) is positive; not an M-matrix"),
                });
            }
        }
        let row_sum: f64 = (1..=n).map(|j| a.entry(i, j)).sum();
        if row_sum < -1e-12 * scale {
            return Err(Error::InvalidGenerator {
                reason: format!("row {i} sums to {row_sum:.3e} < 0"),
            });
        }
    }
    let mut u = a.inverse().map_err(|e| Error::InvalidGenerator {
        reason: format!("generator not invertible: {e}"),
    })?;
    // Inversion leaves ~1e-16 asymmetry; store the exactly symmetric average.
    for i in 1..=n {
        for j in (i + 1)..=n {
            let m = 0.5 * (u.entry(i, j) + u.entry(j, i));
            u.set_entry(i, j, m);
            u.set_entry(j, i, m);
        }
    }
    let report = validate_potential(&u);
    if !report.pass() {
        return Err(Error::InvalidPotential {
            reason: report.first_failure().unwrap_or_else(|| "unknown".into()),
        });
    }
    Ok(SymmetricPotential { u, generator: a })
}

/// Draw a random potential: a sparse symmetric M-matrix generator on a
/// connected pattern (a spanning path plus random extra edges), inverted and
/// validated. Resamples on the rare validation failure, with bounded retries.
pub fn random_potential(n: usize, seed: u64, dominance: f64) -> Result<SymmetricPotential> {
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    if !dominance.is_finite() || dominance <= 0.0 {
        return Err(Error::InvalidGenerator {
            reason: format!("dominance margin must be positive, got {dominance}"),
        });
    }
    for attempt in 0..MAX_POTENTIAL_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let mut a = vec![0.0f64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let on_path = j == i + 1;
                let keep = on_path || rng.random_range(0.0..1.0) < 0.35;
                if keep {
                    let w = -rng.random_range(0.0..1.0);
                    // Exact zeros would disconnect the pattern; nudge away.
                    let w = if w == 0.0 { -0.5 } else { w };
                    a[i * n + j] = w;
                    a[j * n + i] = w;
                }
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i * n + j].abs()).sum();
            a[i * n + i] = off + dominance * rng.random_range(0.5..1.5);
        }
        let gen = Kernel::from_flat(n, a)?;
        if let Ok(p) = potential_from_generator(gen) {
            return Ok(p);
        }
    }
    Err(Error::PotentialRetriesExhausted {
        attempts: MAX_POTENTIAL_RETRIES,
    })
}

/// Pass/fail record for each potential-shape property of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialValidation {
    pub symmetry_ok: bool,
    pub positivity_ok: bool,
    pub domination_ok: bool,
    /// U^(-1) exists with nonpositive off-diagonal and positive diagonal.
    pub inverse_m_ok: bool,
    /// Row sums of U^(-1) are nonnegative.
    pub row_sums_ok: bool,
}

impl PotentialValidation {
    pub fn pass(&self) -> bool {
        self.symmetry_ok
            && self.positivity_ok
            && self.domination_ok
            && self.inverse_m_ok
            && self.row_sums_ok
    }

    pub fn first_failure(&self) -> Option<String> {
        if !self.symmetry_ok {
            Some("not symmetric".into())
        } else if !self.positivity_ok {
            Some("not strictly positive".into())
        } else if !self.domination_ok {
            Some("diagonal domination fails".into())
        } else if !self.inverse_m_ok {
            Some("inverse is not an M-matrix".into())
        } else if !self.row_sums_ok {
            Some("inverse has a negative row sum".into())
        } else {
            None
        }
    }
}

/// Check whether U has the potential shape: symmetric, strictly positive,
/// diagonally dominated, with an M-matrix inverse of nonnegative row sums.
pub fn validate_potential(u: &Kernel) -> PotentialValidation {
    let n = u.n();
    let scale = u.scale().max(f64::MIN_POSITIVE);
    let symmetry_ok = u.asymmetry() <= POTENTIAL_SYMMETRY_TOL;
    let positivity_ok = u.strictly_positive();
    let mut domination_ok = true;
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                let cap = u.entry(i, i).min(u.entry(j, j));
                if u.entry(i, j) - cap > 1e-12 * scale {
                    domination_ok = false;
                }
            }
        }
    }
    let (inverse_m_ok, row_sums_ok) = match u.inverse() {
        Ok(a) => {
            let ascale = a.scale().max(f64::MIN_POSITIVE);
            let mut m_ok = true;
            let mut rows_ok = true;
            for i in 1..=n {
                if a.entry(i, i) <= 0.0 {
                    m_ok = false;
                }
                let mut row_sum = 0.0;
                for j in 1..=n {
                    if i != j && a.entry(i, j) > 1e-12 * ascale {
                        m_ok = false;
                    }
                    row_sum += a.entry(i, j);
                }
                if row_sum < -1e-10 * ascale {
                    rows_ok = false;
                }
            }
            (m_ok, rows_ok)
        }
        Err(_) => (false, false),
    };
    PotentialValidation {
        symmetry_ok,
        positivity_ok,
        domination_ok,
        inverse_m_ok,
        row_sums_ok,
    }
}

/// A base kernel with a column shift attached: composed_jk = base_jk + f_k.
///
/// The composed matrix is built once at construction; the three views stay
/// consistent because the fields are read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedKernel {
    base: Kernel,
    f: Vec<f64>,
    composed: Kernel,
}

impl PerturbedKernel {
    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn composed(&self) -> &Kernel {
        &self.composed
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }
}

/// Attach a strictly positive column shift f to a base kernel.
pub fn perturb(base: Kernel, f: &[f64]) -> Result<PerturbedKernel> {
    if f.len() != base.n() {
        return Err(Error::DimensionMismatch {
            expected: base.n(),
            got: f.len(),
        });
    }
    if f.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidPerturbation);
    }
    let n = base.n();
    let mut entries = Vec::with_capacity(n * n);
    for i in 1..=n {
        for j in 1..=n {
            entries.push(base.entry(i, j) + f[j - 1]);
        }
    }
    let mut composed = Kernel::from_flat(n, entries)?;
    if let Some(labels) = base.labels() {
        composed = composed.with_labels(labels.to_vec())?;
    }
    Ok(PerturbedKernel {
        base,
        f: f.to_vec(),
        composed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_toeplitz_matches_hand_values() {
        let k = exp_toeplitz(&[0.0, 1.0, 3.0], std::f64::consts::LN_2).unwrap();
        assert_relative_eq!(k.entry(1, 2), 0.5, max_relative = 1e-14);
        assert_relative_eq!(k.entry(1, 3), 0.125, max_relative = 1e-14);
        assert_relative_eq!(k.entry(2, 3), 0.25, max_relative = 1e-14);
        assert_eq!(k.entry(2, 2), 1.0);
        assert_eq!(k.labels(), Some(&[0.0, 1.0, 3.0][..]));
    }

    #[test]
    fn exp_toeplitz_is_toeplitz_on_uniform_grid() {
        let pts: Vec<f64> = (0..6).map(|i| 0.5 * i as f64).collect();
        let k = exp_toeplitz(&pts, 0.8).unwrap();
        for i in 1..=5 {
            for j in 1..=5 {
                assert_relative_eq!(k.entry(i, j), k.entry(i + 1, j + 1), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn exp_toeplitz_rejects_bad_inputs() {
        assert!(exp_toeplitz(&[0.0, 0.0], 1.0).is_err());
        assert!(exp_toeplitz(&[0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn min_kernel_matches_hand_values() {
        let k = min_kernel(&[1.0, 2.0, 5.0]).unwrap();
        assert_eq!(k.flat(), &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 2.0, 5.0]);
    }

    #[test]
    fn min_kernel_rejects_nonpositive_points() {
        assert!(min_kernel(&[0.0, 1.0]).is_err());
        assert!(min_kernel(&[-1.0, 1.0]).is_err());
    }

    #[test]
    fn diag_plus_constant_matches_hand_values() {
        let k = diag_plus_constant(&[1.0, 2.0, 3.0], 1.0).unwrap();
        assert_eq!(k.flat(), &[2.0, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0, 1.0, 4.0]);
    }

    #[test]
    fn diag_plus_constant_rejects_zero_row() {
        assert!(diag_plus_constant(&[0.0, 1.0], 0.0).is_err());
        assert!(diag_plus_constant(&[1.0, -1.0], 0.5).is_err());
    }

    #[test]
    fn generator_two_by_two_inverts_to_known_potential() {
        let a = Kernel::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let p = potential_from_generator(a).unwrap();
        let third = 1.0 / 3.0;
        assert_relative_eq!(p.u().entry(1, 1), 2.0 * third, max_relative = 1e-12);
        assert_relative_eq!(p.u().entry(1, 2), third, max_relative = 1e-12);
        assert_relative_eq!(p.u().entry(2, 2), 2.0 * third, max_relative = 1e-12);
    }

    #[test]
    fn generator_rejects_positive_offdiagonal() {
        let a = Kernel::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!(potential_from_generator(a).is_err());
    }

    #[test]
    fn random_potentials_validate_across_seeds() {
        for n in [1usize, 3, 10, 30] {
            for seed in 0..25u64 {
                let p = random_potential(n, seed, DEFAULT_DOMINANCE).unwrap();
                let rep = validate_potential(p.u());
                assert!(rep.pass(), "n={n} seed={seed}: {rep:?}");
            }
        }
    }

    #[test]
    fn random_potential_is_deterministic() {
        let a = random_potential(8, 99, DEFAULT_DOMINANCE).unwrap();
        let b = random_potential(8, 99, DEFAULT_DOMINANCE).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validate_flags_asymmetry() {
        let u = Kernel::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(!validate_potential(&u).symmetry_ok);
    }

    #[test]
    fn perturb_zero_base_gives_column_constant() {
        let base = Kernel::from_flat(2, vec![0.0; 4]).unwrap();
        let p = perturb(base, &[1.0, 2.0]).unwrap();
        assert_eq!(p.composed().flat(), &[1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn perturb_rejects_nonpositive_shift() {
        let base = Kernel::identity(2);
        assert!(perturb(base.clone(), &[1.0, 0.0]).is_err());
        assert!(perturb(base, &[1.0]).is_err());
    }
}
