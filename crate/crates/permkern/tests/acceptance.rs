//! End-to-end guarantees for the shipped library, one check per line of
//! output. Every check carries its tolerance inline and several carry a
//! wall-clock budget; a blown budget fails the check even if the math passed.
//!
//! Run with `cargo test --test acceptance`.

// Index loops over paired arrays read better than zipped iterators here.
#![allow(clippy::needless_range_loop)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use permkern::dichotomy::{
    asymptotic_scan, limit_point_check, triple_residual, AsymptoticVerdict, LimitPointConfig,
    ScanConfig, ScanSource, TailOutcome,
};
use permkern::kernels::{diag_plus_constant, exp_toeplitz, min_kernel, perturb, random_potential};
use permkern::matrix::lt_determinant;
use permkern::monotone::MonotoneFn;
use permkern::permanental::{lt_report, PermanentalSpec};
use permkern::potential::construct_h;
use permkern::symcheck::{
    check_necessary, pit_equivalence, qtilde, symmetrizable, SymmetrizabilityVerdict,
};
use permkern::{DiagonalScaling, Kernel};

type CheckOutcome = Result<String, String>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> CheckOutcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "transform invariance under diagonal conjugation",
            budget: Some(Duration::from_secs(5)),
            run: conjugation_invariance,
        },
        Criterion {
            id: 2,
            name: "verdict agreement with the randomized determinant oracle",
            budget: Some(Duration::from_secs(30)),
            run: verdict_oracle_agreement,
        },
        Criterion {
            id: 3,
            name: "necessary conditions on constructed equivalent pairs",
            budget: None,
            run: necessary_condition_suite,
        },
        Criterion {
            id: 4,
            name: "shifted diagonal-plus-constant kernels stay symmetrizable",
            budget: None,
            run: dpc_shift_witness,
        },
        Criterion {
            id: 5,
            name: "factored residual identities on structured triples",
            budget: None,
            run: residual_factored_forms,
        },
        Criterion {
            id: 6,
            name: "asymptotic scan verdicts on the structured families",
            budget: Some(Duration::from_secs(10)),
            run: asymptotic_scan_verdicts,
        },
        Criterion {
            id: 7,
            name: "weight construction audit over random potentials",
            budget: Some(Duration::from_secs(60)),
            run: construction_audit,
        },
        Criterion {
            id: 8,
            name: "Monte Carlo agreement with the exact transform",
            budget: Some(Duration::from_secs(120)),
            run: monte_carlo_transform,
        },
        Criterion {
            id: 9,
            name: "limit-point form failure on the reciprocal sequence",
            budget: None,
            run: limit_point_instantiation,
        },
    ];

    let mut failures = 0usize;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Ok(Ok(detail)) => {
                if let Some(budget) = c.budget {
                    if elapsed > budget {
                        failures += 1;
                        format!("FAIL ({elapsed:.2?} exceeds {budget:.0?} budget) — {detail}")
                    } else {
                        format!("PASS ({elapsed:.2?}) — {detail}")
                    }
                } else {
                    format!("PASS ({elapsed:.2?}) — {detail}")
                }
            }
            Ok(Err(reason)) => {
                failures += 1;
                format!("FAIL ({elapsed:.2?}) — {reason}")
            }
            Err(panic) => {
                failures += 1;
                let msg = panic
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| panic.downcast_ref::<&str>().copied())
                    .unwrap_or("panic");
                format!("FAIL ({elapsed:.2?}) — panicked: {msg}")
            }
        };
        println!("criterion {} [{}]: {}", c.id, c.name, verdict);
    }
    if failures > 0 {
        eprintln!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}

fn positive_kernel(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Kernel {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    Kernel::from_rows(&rows).expect("entries are finite")
}

fn symmetric_positive(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Kernel {
    let mut rows = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(lo..hi);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    Kernel::from_rows(&rows).expect("entries are finite")
}

fn random_scaling(rng: &mut ChaCha8Rng, n: usize) -> DiagonalScaling {
    DiagonalScaling::new((0..n).map(|_| rng.random_range(0.1..10.0)).collect())
        .expect("entries are positive")
}

/// det(I + K diag(s)) stays strictly positive when the scaled row sums are
/// below 1; draw s under that bound so every probe is in-domain.
fn safe_probe(rng: &mut ChaCha8Rng, k: &Kernel) -> Vec<f64> {
    let n = k.n();
    let cap = 0.9 / (n as f64 * k.scale().max(f64::MIN_POSITIVE));
    (0..n).map(|_| rng.random_range(0.0..cap)).collect()
}

// 500 random positive kernels conjugated by random positive diagonals must
// leave det(I + K diag(s))^{-alpha} unchanged to 1e-10 relative at 10 probes.
fn conjugation_invariance() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n = rng.random_range(2..=8);
        let k = positive_kernel(&mut rng, n, 0.05, 10.0);
        let lam = random_scaling(&mut rng, n);
        let conj = lam.conjugate(&k).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let s = safe_probe(&mut rng, &k);
            let alpha = rng.random_range(0.1..3.0);
            let a = lt_determinant(&k, &s, alpha)
                .map_err(|e| format!("case {case}: base transform failed: {e}"))?;
            let b = lt_determinant(&conj, &s, alpha)
                .map_err(|e| format!("case {case}: conjugated transform failed: {e}"))?;
            let rel = (a - b).abs() / a.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if rel > 1e-10 {
                return Err(format!(
                    "case {case}: transforms disagree by {rel:.3e} (> 1e-10) at n={n}"
                ));
            }
        }
    }
    Ok(format!(
        "500 kernels x 10 probes, worst relative gap {worst:.2e}"
    ))
}

fn constructed_pair(rng: &mut ChaCha8Rng, n: usize) -> (Kernel, Kernel) {
    let q = symmetric_positive(rng, n, 0.5, 2.0);
    let lam = random_scaling(rng, n);
    let k = lam.conjugate(&q).expect("dimensions match");
    (k, q)
}

// Full decision vs. the 256-trial randomized determinant test on 1000 3x3
// and 500 4x4 kernels, half constructed equivalent to a symmetric matrix and
// half unconstrained; 100% agreement outside Indeterminate, Indeterminate
// rate below 1%.
fn verdict_oracle_agreement() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut indeterminate = 0usize;
    let mut total = 0usize;
    for (count, n) in [(1000usize, 3usize), (500, 4)] {
        for case in 0..count {
            total += 1;
            let k = if case % 2 == 0 {
                constructed_pair(&mut rng, n).0
            } else {
                positive_kernel(&mut rng, n, 0.1, 10.0)
            };
            let verdict = symmetrizable(&k, 1e-9);
            let qt = qtilde(&k).map_err(|e| e.to_string())?;
            let oracle = pit_equivalence(&k, &qt, 256, 7_000 + case as u64, 1e-8)
                .map_err(|e| e.to_string())?;
            match verdict {
                SymmetrizabilityVerdict::Symmetrizable { .. } => {
                    if !oracle {
                        return Err(format!(
                            "n={n} case {case}: verdict says equivalent, oracle disagrees"
                        ));
                    }
                }
                SymmetrizabilityVerdict::NotSymmetrizable { .. } => {
                    if oracle {
                        return Err(format!(
                            "n={n} case {case}: verdict says inequivalent, oracle disagrees"
                        ));
                    }
                }
                SymmetrizabilityVerdict::Indeterminate { .. } => indeterminate += 1,
            }
        }
    }
    let rate = indeterminate as f64 / total as f64;
    if rate >= 0.01 {
        return Err(format!(
            "indeterminate rate {rate:.3} on {total} cases exceeds 1%"
        ));
    }
    Ok(format!(
        "{total} cases, full agreement, {indeterminate} indeterminate"
    ))
}

// Every constructed pair (K, Q) must pass all four necessary-condition
// families at 1e-9: minors up to order 3 plus full, diagonals, opposite-entry
// products, and oriented cycles.
fn necessary_condition_suite() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut checked = 0usize;
    for (count, n) in [(500usize, 3usize), (250, 4), (100, 6)] {
        for case in 0..count {
            let (k, q) = constructed_pair(&mut rng, n);
            let report = check_necessary(&k, &q, 1e-9).map_err(|e| e.to_string())?;
            if !report.all_ok() {
                return Err(format!(
                    "n={n} case {case}: necessary conditions failed: {:?}",
                    report.worst_violation
                ));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} constructed pairs, all four families pass"
    ))
}

// A diagonal-plus-constant kernel with any positive column shift must stay
// symmetrizable, and conjugating by diag(f_k + d)^{1/2} must symmetrize it
// to 1e-10 explicitly.
fn dpc_shift_witness() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for case in 0..100 {
        let n = rng.random_range(3..=9);
        let lam: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let d = rng.random_range(0.1..2.0);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let base = diag_plus_constant(&lam, d).map_err(|e| e.to_string())?;
        let shifted = perturb(base, &f).map_err(|e| e.to_string())?;
        match symmetrizable(shifted.composed(), 1e-9) {
            SymmetrizabilityVerdict::Symmetrizable { .. } => {}
            other => {
                return Err(format!(
                    "case {case}: expected symmetrizable, got {other:?}"
                ))
            }
        }
        let g_half: Vec<f64> = f.iter().map(|fk| (fk + d).sqrt()).collect();
        let conj = DiagonalScaling::new(g_half)
            .and_then(|s| s.conjugate(shifted.composed()))
            .map_err(|e| e.to_string())?;
        let asym = conj.asymmetry();
        if asym > 1e-10 {
            return Err(format!(
                "case {case}: explicit conjugation leaves asymmetry {asym:.3e} (> 1e-10)"
            ));
        }
    }
    Ok("100 shifted kernels, explicit square-root conjugation symmetric to 1e-10".into())
}

// Parameters kept within one decade of each other: the raw residual is a
// difference of three-entry products, so its trailing digits are exactly the
// cancellation digits, and a 1e-12 relative comparison against the factored
// form is only meaningful while the product scale stays within ~3 decades of
// the residual itself.
fn catalog_fn(rng: &mut ChaCha8Rng) -> MonotoneFn {
    match rng.random_range(0..3) {
        0 => MonotoneFn::Affine {
            a: rng.random_range(0.2..0.8),
            b: rng.random_range(0.3..0.9),
        },
        1 => MonotoneFn::PowerPlusConst {
            q: rng.random_range(0.2..0.8),
            beta: rng.random_range(0.6..1.2),
        },
        _ => MonotoneFn::ExpSaturating {
            c: rng.random_range(1.2..2.2),
        },
    }
}

// The raw six-entry residual on equal-spacing exponential-Toeplitz triples
// and on min-kernel triples must match the factored closed forms to 1e-12
// relative, over 200 random parameterizations each.
fn residual_factored_forms() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for case in 0..200 {
        // Equal-spacing exponential kernel: common factor (u(a) + f(m2)),
        // then (u(a) - u(2a)) * (f(m1) - f(m3)).
        let m1 = rng.random_range(0.4..1.2);
        let a = rng.random_range(0.4..0.9);
        let lambda = rng.random_range(0.5..1.2);
        let f = catalog_fn(&mut rng);
        let points = [m1, m1 + a, m1 + 2.0 * a];
        let base = exp_toeplitz(&points, lambda).map_err(|e| e.to_string())?;
        let shift: Vec<f64> = points
            .iter()
            .map(|&p| f.eval(p))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let composed = perturb(base, &shift).map_err(|e| e.to_string())?;
        let raw = triple_residual(composed.composed(), 1, 2, 3)
            .map_err(|e| e.to_string())?
            .value;
        let u = |x: f64| (-lambda * x).exp();
        let factored = (u(a) + shift[1]) * (u(a) - u(2.0 * a)) * (shift[0] - shift[2]);
        let rel = (raw - factored).abs() / factored.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if rel > 1e-12 {
            return Err(format!(
                "exp case {case}: raw {raw:.17e} vs factored {factored:.17e} (rel {rel:.3e})"
            ));
        }

        // Min kernel: common factor (s1 + f(s1)), then (s1 - s2) * (f(s3) - f(s2)).
        let s1 = rng.random_range(0.3..1.0);
        let s2 = s1 + rng.random_range(0.4..1.2);
        let s3 = s2 + rng.random_range(0.4..1.2);
        let g = catalog_fn(&mut rng);
        let base = min_kernel(&[s1, s2, s3]).map_err(|e| e.to_string())?;
        let shift: Vec<f64> = [s1, s2, s3]
            .iter()
            .map(|&p| g.eval(p))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let composed = perturb(base, &shift).map_err(|e| e.to_string())?;
        let raw = triple_residual(composed.composed(), 1, 2, 3)
            .map_err(|e| e.to_string())?
            .value;
        let factored = (s1 + shift[0]) * (s1 - s2) * (shift[2] - shift[1]);
        let rel = (raw - factored).abs() / factored.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if rel > 1e-12 {
            return Err(format!(
                "min case {case}: raw {raw:.17e} vs factored {factored:.17e} (rel {rel:.3e})"
            ));
        }
    }
    Ok(format!(
        "200 exp + 200 min parameterizations, worst relative gap {worst:.2e}"
    ))
}

// Structured scans: every exponential-Toeplitz and min-kernel shift must be
// witnessed above all of {1, 10, 100, 1000}; a diagonal-plus-constant tail
// must come back possibly-symmetrizable with the exact tail start.
fn asymptotic_scan_verdicts() -> CheckOutcome {
    let cfg = ScanConfig::default();
    let catalog = [
        MonotoneFn::Affine { a: 1.0, b: 0.5 },
        MonotoneFn::PowerPlusConst { q: 1.0, beta: 1.5 },
        MonotoneFn::ExpSaturating { c: 2.0 },
    ];
    let mut scans = 0usize;
    for lambda in [0.5, 1.0, 2.0] {
        for f in &catalog {
            let source = ScanSource::ExpToeplitzPlusF {
                lambda,
                f: f.clone(),
            };
            match asymptotic_scan(&source, &cfg).map_err(|e| e.to_string())? {
                AsymptoticVerdict::NotAsymptoticallySymmetrizable { witnesses, .. } => {
                    if witnesses.len() != cfg.schedule.len() {
                        return Err(format!(
                            "exp lambda={lambda} f={f}: {} witnesses for {} thresholds",
                            witnesses.len(),
                            cfg.schedule.len()
                        ));
                    }
                    for w in &witnesses {
                        if w.residual.indices.0 < w.threshold {
                            return Err(format!(
                                "exp lambda={lambda} f={f}: witness {:?} dips below threshold {}",
                                w.residual.indices, w.threshold
                            ));
                        }
                    }
                }
                other => return Err(format!("exp lambda={lambda} f={f}: unexpected {other:?}")),
            }
            scans += 1;
        }
    }
    for f in &catalog {
        let source = ScanSource::MinPlusF { f: f.clone() };
        match asymptotic_scan(&source, &cfg).map_err(|e| e.to_string())? {
            AsymptoticVerdict::NotAsymptoticallySymmetrizable { witnesses, .. } => {
                if witnesses.len() != cfg.schedule.len() {
                    return Err(format!("min f={f}: missing witnesses"));
                }
            }
            other => return Err(format!("min f={f}: unexpected {other:?}")),
        }
        scans += 1;
    }
    // Head with an exponential bump below n0 = 12, clean shifted
    // diagonal-plus-constant tail from there on.
    let n0 = 12usize;
    let f = MonotoneFn::Affine { a: 1.0, b: 0.5 };
    let source = ScanSource::Callback(Box::new(move |j, k| {
        let mut v = 0.25 + f.eval(k as f64)?;
        if j.min(k) < n0 {
            v += 0.5 * (-0.7 * (j as f64 - k as f64).abs()).exp();
        }
        if j == k {
            v += 1.5;
        }
        Ok(v)
    }));
    match asymptotic_scan(&source, &cfg).map_err(|e| e.to_string())? {
        AsymptoticVerdict::PossiblyAsymptoticallySymmetrizable { n0_candidate, .. } => {
            if n0_candidate != n0 {
                return Err(format!(
                    "tail source: candidate {n0_candidate}, expected {n0}"
                ));
            }
        }
        other => return Err(format!("tail source: unexpected {other:?}")),
    }
    scans += 1;
    Ok(format!(
        "{scans} scans: 12 structured witnesses at every threshold, tail start recovered at {n0}"
    ))
}

// 50 random 30-point potentials: the constructed weights must respect the
// half-to-double bounds exactly, satisfy f = U h, leave every general block
// at or above the residual floor, and obey the logged stability inequality.
fn construction_audit() -> CheckOutcome {
    let floor = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut general_blocks = 0usize;
    for seed in 0..50u64 {
        let u = random_potential(30, seed, 0.1)
            .map_err(|e| e.to_string())?
            .into_kernel();
        let hstar: Vec<f64> = (0..30).map(|_| rng.random_range(0.5..2.0)).collect();
        let built = construct_h(&u, &hstar, floor, 900 + seed).map_err(|e| e.to_string())?;
        for j in 0..30 {
            if !(built.h[j] >= 0.5 * hstar[j] && built.h[j] <= 2.0 * hstar[j]) {
                return Err(format!(
                    "seed {seed}: h[{j}] = {} outside [h*/2, 2h*] = [{}, {}]",
                    built.h[j],
                    0.5 * hstar[j],
                    2.0 * hstar[j]
                ));
            }
        }
        let f_check = u.matvec(&built.h);
        for j in 0..30 {
            let gap = (f_check[j] - built.f[j]).abs();
            if gap > 1e-10 * built.f[j].abs().max(1.0) {
                return Err(format!("seed {seed}: f[{j}] off U h by {gap:.3e}"));
            }
        }
        for record in &built.block_log {
            if record.epsilon_used == 0.0 && record.f_value == 0.0 {
                continue; // diagonal-plus-constant block, exempt by design
            }
            let idx = record.indices;
            let mut rows = vec![vec![0.0f64; 3]; 3];
            for (r, &ir) in idx.iter().enumerate() {
                for (c, &ic) in idx.iter().enumerate() {
                    rows[r][c] = u.entry(ir, ic) + built.f[ic - 1];
                }
            }
            let w = Kernel::from_rows(&rows).map_err(|e| e.to_string())?;
            let res = triple_residual(&w, 1, 2, 3).map_err(|e| e.to_string())?;
            if res.normalized.abs() < floor {
                return Err(format!(
                    "seed {seed} block {}: final residual {:.3e} below floor",
                    record.l, res.normalized
                ));
            }
            let drift = (res.value - record.f_value).abs();
            if drift > 0.5 * record.f_value.abs() {
                return Err(format!(
                    "seed {seed} block {}: residual drifted by {drift:.3e} vs logged {:.3e}",
                    record.l, record.f_value
                ));
            }
            general_blocks += 1;
        }
    }
    Ok(format!(
        "50 seeds at n=30, {general_blocks} general blocks audited (bounds, f = Uh, floor, stability)"
    ))
}

fn wishart3(rng: &mut ChaCha8Rng) -> Kernel {
    let a: Vec<f64> = (0..9)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut rows = vec![vec![0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for t in 0..3 {
                acc += a[i * 3 + t] * a[j * 3 + t];
            }
            rows[i][j] = acc;
        }
    }
    // Normalize the trace so probe magnitudes are comparable across draws.
    let trace: f64 = (0..3).map(|i| rows[i][i]).sum();
    let scale = 3.0 / trace.max(1e-6);
    for row in &mut rows {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Kernel::from_rows(&rows).expect("finite entries")
}

// 20 random PSD kernels x three exponents at one million samples each:
// at least 95% of transform probes within four standard errors of the exact
// determinant value, and marginal means matching alpha * K_ii.
fn monte_carlo_transform() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let count = 1_000_000usize;
    let mut probes_total = 0usize;
    let mut probes_flagged = 0usize;
    let mut marginals_total = 0usize;
    let mut marginals_flagged = 0usize;
    for rep in 0..20u64 {
        let k = wishart3(&mut rng);
        let s_points: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.5)).collect())
            .collect();
        for (m, n2) in [(1u32, 2u32), (1, 1), (3, 2)] {
            let spec = PermanentalSpec::new(k.clone(), m, n2).map_err(|e| e.to_string())?;
            let report =
                lt_report(&spec, &s_points, count, 10_000 + rep).map_err(|e| e.to_string())?;
            let flags = report.flags.as_ref().expect("sampled run has flags");
            probes_total += flags.len();
            probes_flagged += flags.iter().filter(|&&f| f).count();

            let alpha = spec.alpha();
            let grid = permkern::permanental::sample_rational(&k, m, n2, count, 10_000 + rep)
                .map_err(|e| e.to_string())?;
            for (i, (mean, se)) in grid.marginal_stats().into_iter().enumerate() {
                let target = alpha * k.entry(i + 1, i + 1);
                marginals_total += 1;
                if (mean - target).abs() > 4.0 * se {
                    marginals_flagged += 1;
                }
            }
        }
    }
    let probe_rate = probes_flagged as f64 / probes_total as f64;
    let marginal_rate = marginals_flagged as f64 / marginals_total as f64;
    if probe_rate > 0.05 {
        return Err(format!(
            "{probes_flagged}/{probes_total} transform probes beyond 4 standard errors"
        ));
    }
    if marginal_rate > 0.05 {
        return Err(format!(
            "{marginals_flagged}/{marginals_total} marginal means beyond 4 standard errors"
        ));
    }
    Ok(format!(
        "{probes_total} probes ({probes_flagged} flagged), {marginals_total} marginals ({marginals_flagged} flagged) at 1e6 samples"
    ))
}

// The reciprocal sequence against exp(-|x - y|): every tail start up to 50
// must fail the admissible form, each with off-diagonal spread above 1e-6.
fn limit_point_instantiation() -> CheckOutcome {
    let points: Vec<f64> = (1..=80).map(|k| 1.0 / k as f64).collect();
    let cfg = LimitPointConfig {
        n0_max: 50,
        window: 16,
        tol: 1e-6,
    };
    let u = |x: f64, y: f64| (-(x - y).abs()).exp();
    let report = limit_point_check(&points, 0.0, &u, &cfg).map_err(|e| e.to_string())?;
    if !report.all_fail {
        return Err("some tail start produced an admissible form".into());
    }
    for check in &report.checks {
        if !check.form_fails {
            return Err(format!("tail start {} unexpectedly admissible", check.n0));
        }
        match &check.outcome {
            TailOutcome::OffDiagonalSpread { spread } => {
                if *spread <= cfg.tol {
                    return Err(format!(
                        "tail start {}: spread {spread:.3e} does not exceed 1e-6",
                        check.n0
                    ));
                }
            }
            other => {
                return Err(format!(
                    "tail start {}: expected off-diagonal spread failure, got {other:?}",
                    check.n0
                ))
            }
        }
    }
    Ok("all 50 tail starts fail with off-diagonal spread above 1e-6".into())
}
