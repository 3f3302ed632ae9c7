//! Monte Carlo sampling of nonnegative vectors whose Laplace transform is
//! `det(I + K diag(s))^{-alpha}`, for rational alpha = m/n with 2m/n integral.
//!
//! Each sample is a sum of r = 2m/n independent vectors (B z)^2 / 2 with
//! z standard normal and B B^T = K, so the exact transform is available in
//! closed form and every empirical mean can be audited against it.

mod eigen;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{fmt_f64, lt_determinant, Kernel};

/// Samples drawn per RNG substream; fixed so results never depend on how
/// many worker threads split the chunks.
const CHUNK: usize = 8192;

/// Kernel plus exponent for the transform `det(I + K diag(s))^{-m/n}`.
#[derive(Debug, Clone)]
pub struct PermanentalSpec {
    kernel: Kernel,
    m: u32,
    n2: u32,
}

impl PermanentalSpec {
    pub fn new(kernel: Kernel, m: u32, n2: u32) -> Result<Self> {
        if m == 0 || n2 == 0 {
            return Err(Error::UnsupportedAlpha { m, n: n2 });
        }
        Ok(Self { kernel, m, n2 })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn alpha(&self) -> f64 {
        f64::from(self.m) / f64::from(self.n2)
    }

    pub fn alpha_parts(&self) -> (u32, u32) {
        (self.m, self.n2)
    }

    /// Number of squared-Gaussian summands per sample, if integral.
    pub fn copies(&self) -> Result<usize> {
        let twice = 2u64 * u64::from(self.m);
        if !twice.is_multiple_of(u64::from(self.n2)) {
            return Err(Error::UnsupportedAlpha {
                m: self.m,
                n: self.n2,
            });
        }
        Ok((twice / u64::from(self.n2)) as usize)
    }
}

/// Factor B with K = B B^T, from the eigendecomposition of K.
struct Factor {
    n: usize,
    /// Row-major n x n.
    b: Vec<f64>,
}

impl Factor {
    /// g = B z.
    fn apply(&self, z: &[f64], g: &mut [f64]) {
        let n = self.n;
        for (i, gi) in g.iter_mut().enumerate() {
            let row = &self.b[i * n..(i + 1) * n];
            *gi = row.iter().zip(z).map(|(bij, zj)| bij * zj).sum();
        }
    }
}

/// Validates symmetry and positive semidefiniteness, then factors K = B B^T.
/// Eigenvalues in [-1e-10 * scale, 0) are clipped to zero; more negative ones
/// reject the kernel outright, and even clippable mass must stay below
/// 1e-8 * trace.
fn factor_psd(k: &Kernel) -> Result<Factor> {
    let n = k.n();
    let scale = k.scale().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in (i + 1)..n {
            let dev = (k.at(i, j) - k.at(j, i)).abs();
            if dev > 1e-10 * scale {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    deviation: dev,
                });
            }
        }
    }
    let (lam, v) = eigen::symmetric_eigen(k);
    let trace: f64 = (0..n).map(|i| k.at(i, i)).sum();
    let mut clipped = 0.0f64;
    let mut roots = Vec::with_capacity(n);
    for &l in &lam {
        if l < -1e-10 * scale {
            return Err(Error::NotPsd {
                reason: format!("eigenvalue {l:.6e} below -1e-10 * scale"),
            });
        }
        if l < 0.0 {
            clipped += -l;
        }
        roots.push(l.max(0.0).sqrt());
    }
    let clip_tol = 1e-8 * trace.max(f64::MIN_POSITIVE);
    if clipped > clip_tol {
        return Err(Error::ClippingTooLarge {
            clipped,
            tol: clip_tol,
        });
    }
    let mut b = vec![0.0f64; n * n];
    for i in 0..n {
        for t in 0..n {
            b[i * n + t] = v[i * n + t] * roots[t];
        }
    }
    Ok(Factor { n, b })
}

/// A count x n grid of samples, row-major: row s is the s-th sample vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub n: usize,
    pub count: usize,
    data: Vec<f64>,
}

impl SampleGrid {
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.n..(s + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    /// Per-coordinate (mean, standard error of the mean).
    pub fn marginal_stats(&self) -> Vec<(f64, f64)> {
        let cnt = self.count.max(1) as f64;
        let mut means = vec![0.0f64; self.n];
        for row in self.rows() {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= cnt;
        }
        let mut vars = vec![0.0f64; self.n];
        for row in self.rows() {
            for ((vv, m), x) in vars.iter_mut().zip(&means).zip(row) {
                let d = x - m;
                *vv += d * d;
            }
        }
        means
            .iter()
            .zip(&vars)
            .map(|(&m, &v)| (m, (v / (cnt * cnt.max(2.0) - cnt)).sqrt()))
            .collect()
    }

    pub fn marginal_means(&self) -> Vec<f64> {
        self.marginal_stats().into_iter().map(|(m, _)| m).collect()
    }

    /// Mean and standard error of exp(-<s, Y>) over the grid.
    pub fn lt_estimate(&self, s: &[f64]) -> Result<(f64, f64)> {
        if s.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: s.len(),
            });
        }
        let cnt = self.count.max(1) as f64;
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for row in self.rows() {
            let dot: f64 = row.iter().zip(s).map(|(y, si)| y * si).sum();
            let e = (-dot).exp();
            sum += e;
            sumsq += e * e;
        }
        let mean = sum / cnt;
        let var = ((sumsq / cnt) - mean * mean).max(0.0);
        let se = if self.count > 1 {
            (var / (cnt - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok((mean, se))
    }

    /// CSV, one sample per line, 17-significant-digit round-trip format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Worker-thread cap: PERMKERN_THREADS if set and >= 1, else available
/// parallelism (capped at 8 — sampling saturates memory bandwidth early).
fn env_workers() -> usize {
    if let Ok(s) = std::env::var("PERMKERN_THREADS") {
        if let Ok(v) = s.trim().parse::<usize>() {
            if v >= 1 {
                return v;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |p| p.get().min(8))
}

/// Fills the grid chunk by chunk. Chunk c always uses RNG stream c+1 of the
/// given seed, so the output is a pure function of (spec, count, seed) no
/// matter how many workers run.
fn fill_grid(
    factor: &Factor,
    copies: usize,
    count: usize,
    seed: u64,
    workers: usize,
) -> SampleGrid {
    let n = factor.n;
    let mut data = vec![0.0f64; count * n];
    let n_chunks = count.div_ceil(CHUNK).max(1);
    let workers = workers.clamp(1, n_chunks);
    {
        let mut jobs: Vec<Vec<(usize, &mut [f64])>> = (0..workers).map(|_| Vec::new()).collect();
        for (c, slice) in data.chunks_mut(CHUNK * n).enumerate() {
            jobs[c % workers].push((c, slice));
        }
        std::thread::scope(|scope| {
            for job in jobs {
                scope.spawn(move || {
                    let mut z = vec![0.0f64; n];
                    let mut g = vec![0.0f64; n];
                    for (c, slice) in job {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(c as u64 + 1);
                        for row in slice.chunks_exact_mut(n) {
                            row.fill(0.0);
                            for _ in 0..copies {
                                for zj in z.iter_mut() {
                                    *zj = rng.sample(StandardNormal);
                                }
                                factor.apply(&z, &mut g);
                                for (y, gi) in row.iter_mut().zip(&g) {
                                    *y += 0.5 * gi * gi;
                                }
                            }
                        }
                    }
                });
            }
        });
    }
    SampleGrid { n, count, data }
}

/// Draws `count` samples for alpha = 1/2 (a single squared-Gaussian vector).
pub fn sample_half(kernel: &Kernel, count: usize, seed: u64) -> Result<SampleGrid> {
    let factor = factor_psd(kernel)?;
    Ok(fill_grid(&factor, 1, count, seed, env_workers()))
}

/// Draws `count` samples for alpha = m/n. Requires 2m/n to be a positive
/// integer; other rationals have no sum-of-squares representation here.
pub fn sample_rational(
    kernel: &Kernel,
    m: u32,
    n2: u32,
    count: usize,
    seed: u64,
) -> Result<SampleGrid> {
    let spec = PermanentalSpec::new(kernel.clone(), m, n2)?;
    let copies = spec.copies()?;
    let factor = factor_psd(kernel)?;
    Ok(fill_grid(&factor, copies, count, seed, env_workers()))
}

#[cfg(test)]
pub(crate) fn sample_rational_with_workers(
    kernel: &Kernel,
    m: u32,
    n2: u32,
    count: usize,
    seed: u64,
    workers: usize,
) -> Result<SampleGrid> {
    let spec = PermanentalSpec::new(kernel.clone(), m, n2)?;
    let copies = spec.copies()?;
    let factor = factor_psd(kernel)?;
    Ok(fill_grid(&factor, copies, count, seed, workers))
}

/// Laplace-transform audit: exact values next to empirical means with
/// standard errors, flagging any probe off by more than 4 standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LTReport {
    pub s_points: Vec<Vec<f64>>,
    pub exact: Vec<f64>,
    pub empirical: Option<Vec<f64>>,
    pub std_err: Option<Vec<f64>>,
    pub flags: Option<Vec<bool>>,
    pub sample_count: usize,
    pub seed: u64,
}

impl LTReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn any_flagged(&self) -> bool {
        self.flags.as_ref().is_some_and(|f| f.iter().any(|&x| x))
    }
}

/// Compares det(I + K diag(s))^{-alpha} against the sampled estimate at each
/// probe. With `count == 0` only the exact column is produced.
pub fn lt_report(
    spec: &PermanentalSpec,
    s_points: &[Vec<f64>],
    count: usize,
    seed: u64,
) -> Result<LTReport> {
    let n = spec.kernel.n();
    for s in s_points {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
        if s.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidScalingVector);
        }
    }
    let alpha = spec.alpha();
    let exact: Vec<f64> = s_points
        .iter()
        .map(|s| lt_determinant(&spec.kernel, s, alpha))
        .collect::<Result<Vec<_>>>()?;
    if count == 0 {
        return Ok(LTReport {
            s_points: s_points.to_vec(),
            exact,
            empirical: None,
            std_err: None,
            flags: None,
            sample_count: 0,
            seed,
        });
    }
    let (m, n2) = spec.alpha_parts();
    let grid = sample_rational(&spec.kernel, m, n2, count, seed)?;
    let mut empirical = Vec::with_capacity(s_points.len());
    let mut std_err = Vec::with_capacity(s_points.len());
    let mut flags = Vec::with_capacity(s_points.len());
    for (s, &ex) in s_points.iter().zip(&exact) {
        let (mean, se) = grid.lt_estimate(s)?;
        flags.push((mean - ex).abs() > 4.0 * se);
        empirical.push(mean);
        std_err.push(se);
    }
    Ok(LTReport {
        s_points: s_points.to_vec(),
        exact,
        empirical: Some(empirical),
        std_err: Some(std_err),
        flags: Some(flags),
        sample_count: count,
        seed,
    })
}
