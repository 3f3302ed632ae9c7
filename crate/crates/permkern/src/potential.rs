//! Potential functions f = Uh and the block-wise construction of a weight
//! vector h whose induced column shift leaves every general block with a
//! provably nonzero 3-cycle residual, while diagonal-plus-constant blocks
//! are left untouched (their residual vanishes identically under any shift).

use crate::dichotomy::{detect_form, BlockForm, FORM_TOL};
use crate::error::{Error, Result};
use crate::kernels::SymmetricPotential;
use crate::matrix::{IndexSet, Kernel};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Default floor below which a normalized residual counts as vanishing.
pub const DEFAULT_FLOOR: f64 = 1e-9;

/// Rungs of the shrinking perturbation-radius ladder.
const LADDER_STEPS: u32 = 40;

/// Step-shrink depth inside a single ball search.
const SEARCH_DEPTH: u32 = 20;

/// f_j = sum_k U[j,k] h[k] for strictly positive h.
pub fn apply_potential(u: &SymmetricPotential, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != u.n() {
        return Err(Error::DimensionMismatch {
            expected: u.n(),
            got: h.len(),
        });
    }
    if h.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::NonpositiveVector);
    }
    Ok(u.u().matvec(h))
}

/// Solve U_I c = f_target - f_star on one 3x3 block.
pub fn solve_triple(u_i: &Kernel, f_star: [f64; 3], f_target: [f64; 3]) -> Result<[f64; 3]> {
    if u_i.n() != 3 {
        return Err(Error::NotTripleBlock { got: u_i.n() });
    }
    let b: Vec<f64> = (0..3).map(|q| f_target[q] - f_star[q]).collect();
    let x = u_i.solve(&b)?;
    Ok([x[0], x[1], x[2]])
}

/// Residual of the composed block W + column shift x.
fn shifted_residual(w: &Kernel, x: [f64; 3]) -> Option<(f64, f64)> {
    let pairs = [(1, 2), (2, 3), (3, 1), (1, 3), (3, 2), (2, 1)];
    let mut vals = [0.0f64; 6];
    let mut ln_sum = 0.0;
    for (slot, &(r, c)) in vals.iter_mut().zip(pairs.iter()) {
        let e = w.entry(r, c) + x[c - 1];
        if !(e > 0.0) {
            return None;
        }
        ln_sum += e.ln();
        *slot = e;
    }
    let value = vals[0] * vals[1] * vals[2] - vals[3] * vals[4] * vals[5];
    Some((value, value * (-0.5 * ln_sum).exp()))
}

/// Find x within the infinity-ball of radius `delta` around `x0` whose
/// shifted residual clears `floor` (normalized).
///
/// The residual is multi-affine in (x1,x2,x3), and for a general block some
/// bilinear coefficient is nonzero, so its zero set cannot fill any ball:
/// stepping single coordinates, then pairs, then all three, at shrinking
/// step sizes with a seeded jitter, must escape it.
pub fn perturb_ball_search(
    w: &Kernel,
    x0: [f64; 3],
    delta: f64,
    floor: f64,
    seed: u64,
) -> Result<[f64; 3]> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidPerturbation);
    }
    match detect_form(w, FORM_TOL)? {
        BlockForm::DiagonalPlusConstant { .. } => return Err(Error::ResidualVanishesIdentically),
        BlockForm::General { .. } => {}
    }
    if let Some((_, norm)) = shifted_residual(w, x0) {
        if norm.abs() > floor {
            return Ok(x0);
        }
    }
    const SUBSETS: [&[usize]; 7] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in 1..=SEARCH_DEPTH {
        let step = delta / f64::from(1u32 << p);
        for coords in SUBSETS {
            for pattern in 0..(1u32 << coords.len()) {
                let jitter = rng.random_range(0.5..1.0);
                let mut x = x0;
                for (bit, &c) in coords.iter().enumerate() {
                    let sgn = if pattern >> bit & 1 == 0 { 1.0 } else { -1.0 };
                    x[c] = x0[c] + sgn * step * jitter;
                }
                if let Some((_, norm)) = shifted_residual(w, x) {
                    if norm.abs() > floor {
                        return Ok(x);
                    }
                }
            }
        }
    }
    Err(Error::SearchExhausted {
        radius: delta,
        floor,
    })
}

/// Per-block record of the construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRecord {
    pub l: usize,
    pub indices: [usize; 3],
    pub classification: BlockForm,
    /// Residual of the block at the time it was finalized.
    #[serde(rename = "F_value")]
    pub f_value: f64,
    /// Ball radius that produced the committed update; 0 when untouched.
    pub epsilon_used: f64,
}

/// Result of the iterative construction: the initial and final weights, the
/// induced potential values, and an auditable per-block log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HConstruction {
    pub hstar: Vec<f64>,
    pub h: Vec<f64>,
    pub f: Vec<f64>,
    pub block_log: Vec<BlockRecord>,
    /// Number of committed block updates.
    pub iterations: usize,
}

impl HConstruction {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("construction serialization cannot fail")
    }
}

/// Run the construction on consecutive index triples {3l+1, 3l+2, 3l+3};
/// a trailing remainder of one or two indices is left untouched.
///
/// `u` must be symmetric, strictly positive, and diagonally dominated (the
/// block machinery needs exactly these; chain structure beyond them is not
/// re-validated here, so modified or hand-built potentials are accepted).
pub fn construct_h(u: &Kernel, hstar: &[f64], floor: f64, seed: u64) -> Result<HConstruction> {
    let n = u.n();
    let blocks: Vec<[usize; 3]> = (0..n / 3)
        .map(|l| [3 * l + 1, 3 * l + 2, 3 * l + 3])
        .collect();
    construct_on_blocks(u, hstar, floor, seed, &blocks)
}

/// Same construction on caller-chosen disjoint triples, given as a sequence
/// of 1-based indices consumed three at a time (a remainder is ignored).
/// Each triple is sorted internally; orientation only flips the residual
/// sign.
pub fn construct_h_with_blocks(
    u: &Kernel,
    hstar: &[f64],
    floor: f64,
    seed: u64,
    order: &[usize],
) -> Result<HConstruction> {
    let n = u.n();
    let mut seen = vec![false; n + 1];
    for &i in order {
        if i == 0 || i > n || seen[i] {
            return Err(Error::InvalidIndexSet);
        }
        seen[i] = true;
    }
    let blocks: Vec<[usize; 3]> = order
        .chunks_exact(3)
        .map(|c| {
            let mut b = [c[0], c[1], c[2]];
            b.sort_unstable();
            b
        })
        .collect();
    construct_on_blocks(u, hstar, floor, seed, &blocks)
}

fn construct_on_blocks(
    u: &Kernel,
    hstar: &[f64],
    floor: f64,
    seed: u64,
    blocks: &[[usize; 3]],
) -> Result<HConstruction> {
    let n = u.n();
    validate_block_potential(u)?;
    if hstar.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: hstar.len(),
        });
    }
    if hstar.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::NonpositiveVector);
    }
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(Error::InvalidPerturbation);
    }

    let mut h = hstar.to_vec();
    let mut f = u.matvec(&h);
    let h_min = hstar.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta0 = h_min / (4.0 * u.inf_norm());
    let mut block_log = Vec::with_capacity(blocks.len());
    let mut finalized: Vec<(usize, f64)> = Vec::new(); // (block position, F at finalize)
    let mut iterations = 0usize;

    for (bi, idx) in blocks.iter().enumerate() {
        let w = u.principal_submatrix(&IndexSet::new(idx.to_vec())?)?;
        let form = detect_form(&w, FORM_TOL)?;
        let (val, norm) = composed_residual(u, &f, *idx);
        if let BlockForm::DiagonalPlusConstant { .. } = form {
            block_log.push(BlockRecord {
                l: bi,
                indices: *idx,
                classification: form,
                f_value: val,
                epsilon_used: 0.0,
            });
            continue;
        }
        if norm.abs() >= floor {
            finalized.push((bi, val));
            block_log.push(BlockRecord {
                l: bi,
                indices: *idx,
                classification: form,
                f_value: val,
                epsilon_used: 0.0,
            });
            continue;
        }

        let mut committed = false;
        for p in 0..=LADDER_STEPS {
            let eps = delta0 * 0.5f64.powi(p as i32);
            let x0 = [f[idx[0] - 1], f[idx[1] - 1], f[idx[2] - 1]];
            let x = match perturb_ball_search(&w, x0, eps, 2.0 * floor, seed ^ (p as u64)) {
                Ok(x) => x,
                // A smaller ball cannot succeed where a larger one failed.
                Err(Error::SearchExhausted { .. }) => break,
                Err(e) => return Err(e),
            };
            let c = solve_triple(&w, x0, x)?;
            let within_bounds = (0..3).all(|q| {
                let j = idx[q] - 1;
                let new = h[j] + c[q];
                0.5 * hstar[j] <= new && new <= 2.0 * hstar[j]
            });
            if !within_bounds {
                continue;
            }
            let mut h_cand = h.clone();
            for q in 0..3 {
                h_cand[idx[q] - 1] += c[q];
            }
            let f_cand = u.matvec(&h_cand);
            let budget_ok = finalized.iter().all(|&(bj, f_ref)| {
                let before = composed_residual(u, &f, blocks[bj]).0;
                let after = composed_residual(u, &f_cand, blocks[bj]).0;
                (after - before).abs() <= f_ref.abs() * 0.5f64.powi((bi + 2) as i32)
            });
            if !budget_ok {
                continue;
            }
            let (val_new, norm_new) = composed_residual(u, &f_cand, *idx);
            if norm_new.abs() < floor {
                continue;
            }
            h = h_cand;
            f = f_cand;
            finalized.push((bi, val_new));
            block_log.push(BlockRecord {
                l: bi,
                indices: *idx,
                classification: form,
                f_value: val_new,
                epsilon_used: eps,
            });
            iterations += 1;
            committed = true;
            break;
        }
        if !committed {
            return Err(Error::BudgetExhausted { block: bi, floor });
        }
    }

    Ok(HConstruction {
        hstar: hstar.to_vec(),
        h,
        f,
        block_log,
        iterations,
    })
}

/// Residual on the composed entries U[j,k] + f[k] over one triple.
pub(crate) fn composed_residual(u: &Kernel, f: &[f64], idx: [usize; 3]) -> (f64, f64) {
    let pairs = [
        (idx[0], idx[1]),
        (idx[1], idx[2]),
        (idx[2], idx[0]),
        (idx[0], idx[2]),
        (idx[2], idx[1]),
        (idx[1], idx[0]),
    ];
    let mut vals = [0.0f64; 6];
    let mut ln_sum = 0.0;
    for (slot, &(r, c)) in vals.iter_mut().zip(pairs.iter()) {
        let e = u.entry(r, c) + f[c - 1];
        ln_sum += e.abs().max(f64::MIN_POSITIVE).ln();
        *slot = e;
    }
    let value = vals[0] * vals[1] * vals[2] - vals[3] * vals[4] * vals[5];
    (value, value * (-0.5 * ln_sum).exp())
}

fn validate_block_potential(u: &Kernel) -> Result<()> {
    let asym = u.asymmetry();
    if asym > crate::kernels::POTENTIAL_SYMMETRY_TOL {
        return Err(Error::InvalidPotential {
            reason: format!("matrix asymmetry {asym:.3e}"),
        });
    }
    if !u.strictly_positive() {
        return Err(Error::InvalidPotential {
            reason: "matrix has nonpositive entries".into(),
        });
    }
    let n = u.n();
    let scale = u.scale().max(f64::MIN_POSITIVE);
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                let cap = u.entry(i, i).min(u.entry(j, j));
                if u.entry(i, j) - cap > 1e-12 * scale {
                    return Err(Error::InvalidPotential {
                        reason: format!("entry ({i},{j}) exceeds its diagonal cap"),
                    });
                }
            }
        }
    }
    Ok(())
}
