//! JSON-facing kernel family descriptors: a tagged enum that materializes to
//! a concrete matrix or hands the scanner a lazily evaluated source.

use super::{diag_plus_constant, exp_toeplitz, min_kernel, perturb, random_potential};
use crate::dichotomy::ScanSource;
use crate::error::{Error, Result};
use crate::matrix::Kernel;
use crate::monotone::MonotoneFn;
use serde::{Deserialize, Serialize};

fn default_dominance() -> f64 {
    super::DEFAULT_DOMINANCE
}

fn default_tail_lam() -> f64 {
    1.0
}

fn default_tail_d() -> f64 {
    0.25
}

fn default_tail_amp() -> f64 {
    0.5
}

fn default_tail_decay() -> f64 {
    1.0
}

/// A kernel family a run can name in JSON, e.g.
/// `{"family":"exp_toeplitz_plus_f","lambda":1,"f":"monotone:k->2-exp(-k)"}`.
///
/// Point-based families carry their own size; the `_plus_f` families live on
/// indices 1, 2, 3, ... and materialize at any requested truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDescriptor {
    ExpToeplitz {
        points: Vec<f64>,
        lambda: f64,
    },
    MinKernel {
        points: Vec<f64>,
    },
    DiagPlusConstant {
        lam: Vec<f64>,
        d: f64,
    },
    RandomPotential {
        n: usize,
        seed: u64,
        #[serde(default = "default_dominance")]
        dominance: f64,
    },
    /// entry(j,k) = exp(-lambda |j-k|) + f(k).
    ExpToeplitzPlusF {
        lambda: f64,
        f: String,
    },
    /// entry(j,k) = min(j,k) + f(k).
    MinKernelPlusF {
        f: String,
    },
    /// Diagonal-plus-constant from index n0 on, with an exponentially
    /// decaying bump below it: base(j,k) = d + [min(j,k) < n0] amp
    /// exp(-decay |j-k|) + [j = k] lam, composed with f(k).
    DpcTailPlusF {
        n0: usize,
        #[serde(default = "default_tail_lam")]
        lam: f64,
        #[serde(default = "default_tail_d")]
        d: f64,
        #[serde(default = "default_tail_amp")]
        amp: f64,
        #[serde(default = "default_tail_decay")]
        decay: f64,
        f: String,
    },
}

impl FamilyDescriptor {
    pub fn from_json_str(s: &str) -> Result<FamilyDescriptor> {
        serde_json::from_str(s).map_err(|e| Error::InvalidFamily {
            reason: e.to_string(),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("descriptor serialization cannot fail")
    }

    /// Natural size for the self-sized families.
    pub fn natural_size(&self) -> Option<usize> {
        match self {
            FamilyDescriptor::ExpToeplitz { points, .. } => Some(points.len()),
            FamilyDescriptor::MinKernel { points } => Some(points.len()),
            FamilyDescriptor::DiagPlusConstant { lam, .. } => Some(lam.len()),
            FamilyDescriptor::RandomPotential { n, .. } => Some(*n),
            _ => None,
        }
    }

    /// Build the concrete matrix. `n` is required for the index-family
    /// variants and, when supplied for a self-sized family, must agree with
    /// its natural size.
    pub fn materialize(&self, n: Option<usize>) -> Result<Kernel> {
        if let (Some(want), Some(have)) = (n, self.natural_size()) {
            if want != have {
                return Err(Error::InvalidFamily {
                    reason: format!("family is {have}-dimensional, but n = {want} was requested"),
                });
            }
        }
        match self {
            FamilyDescriptor::ExpToeplitz { points, lambda } => exp_toeplitz(points, *lambda),
            FamilyDescriptor::MinKernel { points } => min_kernel(points),
            FamilyDescriptor::DiagPlusConstant { lam, d } => diag_plus_constant(lam, *d),
            FamilyDescriptor::RandomPotential { n, seed, dominance } => {
                Ok(random_potential(*n, *seed, *dominance)?.into_kernel())
            }
            FamilyDescriptor::ExpToeplitzPlusF { lambda, f } => {
                let n = need_n(n)?;
                let points: Vec<f64> = (1..=n).map(|i| i as f64).collect();
                let base = exp_toeplitz(&points, *lambda)?;
                let shift = eval_shift(f, n)?;
                Ok(perturb(base, &shift)?.composed().clone())
            }
            FamilyDescriptor::MinKernelPlusF { f } => {
                let n = need_n(n)?;
                let points: Vec<f64> = (1..=n).map(|i| i as f64).collect();
                let base = min_kernel(&points)?;
                let shift = eval_shift(f, n)?;
                Ok(perturb(base, &shift)?.composed().clone())
            }
            FamilyDescriptor::DpcTailPlusF {
                n0,
                lam,
                d,
                amp,
                decay,
                f,
            } => {
                let n = need_n(n)?;
                check_tail_params(*n0, *lam, *d, *amp, *decay)?;
                let mf = parse_f(f)?;
                let mut entries = Vec::with_capacity(n * n);
                for j in 1..=n {
                    for k in 1..=n {
                        entries.push(
                            tail_base(j, k, *n0, *lam, *d, *amp, *decay) + mf.eval(k as f64)?,
                        );
                    }
                }
                Kernel::from_flat(n, entries)
            }
        }
    }

    /// Hand the scanner an evaluable view: factored residual sources for the
    /// two structured families, a callback for the tail family, and the
    /// materialized matrix otherwise.
    pub fn scan_source(&self) -> Result<ScanSource> {
        match self {
            FamilyDescriptor::ExpToeplitzPlusF { lambda, f } => {
                if !lambda.is_finite() || *lambda <= 0.0 {
                    return Err(Error::InvalidDecayRate);
                }
                Ok(ScanSource::ExpToeplitzPlusF {
                    lambda: *lambda,
                    f: parse_f(f)?,
                })
            }
            FamilyDescriptor::MinKernelPlusF { f } => Ok(ScanSource::MinPlusF { f: parse_f(f)? }),
            FamilyDescriptor::DpcTailPlusF {
                n0,
                lam,
                d,
                amp,
                decay,
                f,
            } => {
                check_tail_params(*n0, *lam, *d, *amp, *decay)?;
                let mf = parse_f(f)?;
                let (n0, lam, d, amp, decay) = (*n0, *lam, *d, *amp, *decay);
                Ok(ScanSource::Callback(Box::new(move |j, k| {
                    Ok(tail_base(j, k, n0, lam, d, amp, decay) + mf.eval(k as f64)?)
                })))
            }
            other => Ok(ScanSource::Kernel(other.materialize(None)?)),
        }
    }

    /// Advisory note attached to reports for parameter regimes the library
    /// accepts without validating.
    pub fn caveat(&self) -> Option<String> {
        let f = match self {
            FamilyDescriptor::ExpToeplitzPlusF { f, .. }
            | FamilyDescriptor::MinKernelPlusF { f }
            | FamilyDescriptor::DpcTailPlusF { f, .. } => f,
            _ => return None,
        };
        match MonotoneFn::parse(f) {
            Ok(MonotoneFn::PowerPlusConst { .. }) => Some(
                "power-law shift accepted unvalidated: no lower bound on the constant \
                 offset (relative to the exponent) is checked here"
                    .into(),
            ),
            _ => None,
        }
    }
}

fn need_n(n: Option<usize>) -> Result<usize> {
    match n {
        Some(v) if v >= 1 => Ok(v),
        _ => Err(Error::InvalidFamily {
            reason: "this family needs an explicit positive truncation size".into(),
        }),
    }
}

fn parse_f(expr: &str) -> Result<MonotoneFn> {
    MonotoneFn::parse(expr)
}

/// Column shift f evaluated at indices 1..=n.
fn eval_shift(expr: &str, n: usize) -> Result<Vec<f64>> {
    let f = parse_f(expr)?;
    (1..=n).map(|k| f.eval(k as f64)).collect()
}

fn check_tail_params(n0: usize, lam: f64, d: f64, amp: f64, decay: f64) -> Result<()> {
    let all_finite = lam.is_finite() && d.is_finite() && amp.is_finite() && decay.is_finite();
    if n0 == 0 || !all_finite || lam <= 0.0 || d < 0.0 || amp <= 0.0 || decay <= 0.0 {
        return Err(Error::InvalidFamily {
            reason: format!(
                "tail family needs n0 >= 1, lam > 0, d >= 0, amp > 0, decay > 0; \
                 got n0={n0}, lam={lam}, d={d}, amp={amp}, decay={decay}"
            ),
        });
    }
    Ok(())
}

fn tail_base(j: usize, k: usize, n0: usize, lam: f64, d: f64, amp: f64, decay: f64) -> f64 {
    let mut v = d;
    if j.min(k) < n0 {
        v += amp * (-decay * (j as f64 - k as f64).abs()).exp();
    }
    if j == k {
        v += lam;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dichotomy::{asymptotic_scan, AsymptoticVerdict, ScanConfig};

    #[test]
    fn descriptor_round_trips_through_json() {
        let cases = [
            r#"{"family":"exp_toeplitz","points":[1.0,2.0,3.0],"lambda":0.5}"#,
            r#"{"family":"min_kernel","points":[1.0,2.5]}"#,
            r#"{"family":"diag_plus_constant","lam":[1.0,2.0],"d":0.5}"#,
            r#"{"family":"random_potential","n":5,"seed":42}"#,
            r#"{"family":"exp_toeplitz_plus_f","lambda":1.0,"f":"monotone:k->2-exp(-k)"}"#,
            r#"{"family":"min_kernel_plus_f","f":"monotone:k->k"}"#,
            r#"{"family":"dpc_tail_plus_f","n0":12,"f":"monotone:k->1+0.5*k"}"#,
        ];
        for src in cases {
            let fd = FamilyDescriptor::from_json_str(src).unwrap();
            let back = FamilyDescriptor::from_json_str(&fd.to_json_string()).unwrap();
            assert_eq!(fd, back, "{src}");
        }
    }

    #[test]
    fn descriptor_rejects_unknown_fields_and_families() {
        assert!(FamilyDescriptor::from_json_str(
            r#"{"family":"exp_toeplitz","points":[1.0],"lambda":1.0,"typo":3}"#
        )
        .is_err());
        assert!(FamilyDescriptor::from_json_str(r#"{"family":"nope"}"#).is_err());
    }

    #[test]
    fn random_potential_descriptor_defaults_dominance() {
        let fd = FamilyDescriptor::from_json_str(r#"{"family":"random_potential","n":4,"seed":7}"#)
            .unwrap();
        let k = fd.materialize(None).unwrap();
        assert_eq!(k.n(), 4);
        assert!(k.strictly_positive());
    }

    #[test]
    fn plus_f_families_materialize_expected_entries() {
        let fd = FamilyDescriptor::from_json_str(
            r#"{"family":"min_kernel_plus_f","f":"monotone:k->k"}"#,
        )
        .unwrap();
        let k = fd.materialize(Some(3)).unwrap();
        assert_eq!(k.entry(1, 2), 3.0); // min(1,2) + f(2)
        assert_eq!(k.entry(3, 1), 2.0); // min(3,1) + f(1)
        assert_eq!(k.entry(1, 3), 4.0); // min(1,3) + f(3)
        assert!(fd.materialize(None).is_err());
    }

    #[test]
    fn natural_size_mismatch_is_rejected() {
        let fd = FamilyDescriptor::from_json_str(r#"{"family":"min_kernel","points":[1.0,2.0]}"#)
            .unwrap();
        assert!(fd.materialize(Some(3)).is_err());
        assert_eq!(fd.materialize(Some(2)).unwrap().n(), 2);
    }

    #[test]
    fn dpc_tail_descriptor_scans_possibly_at_its_n0() {
        let fd = FamilyDescriptor::from_json_str(
            r#"{"family":"dpc_tail_plus_f","n0":12,"f":"monotone:k->1+0.5*k"}"#,
        )
        .unwrap();
        let src = fd.scan_source().unwrap();
        match asymptotic_scan(&src, &ScanConfig::default()).unwrap() {
            AsymptoticVerdict::PossiblyAsymptoticallySymmetrizable { n0_candidate, .. } => {
                assert_eq!(n0_candidate, 12);
            }
            other => panic!("expected possibly verdict, got {other:?}"),
        }
    }

    #[test]
    fn materialized_and_callback_tail_agree() {
        let fd = FamilyDescriptor::from_json_str(
            r#"{"family":"dpc_tail_plus_f","n0":4,"f":"monotone:k->2-exp(-k)"}"#,
        )
        .unwrap();
        let k = fd.materialize(Some(8)).unwrap();
        let src = fd.scan_source().unwrap();
        if let crate::dichotomy::ScanSource::Callback(eval) = &src {
            for j in 1..=8 {
                for c in 1..=8 {
                    assert_eq!(k.entry(j, c), eval(j, c).unwrap());
                }
            }
        } else {
            panic!("expected callback source");
        }
    }

    #[test]
    fn power_shift_carries_caveat() {
        let fd = FamilyDescriptor::from_json_str(
            r#"{"family":"min_kernel_plus_f","f":"monotone:k->0.2+k^0.5"}"#,
        )
        .unwrap();
        assert!(fd.caveat().is_some());
        let affine = FamilyDescriptor::from_json_str(
            r#"{"family":"min_kernel_plus_f","f":"monotone:k->k"}"#,
        )
        .unwrap();
        assert!(affine.caveat().is_none());
    }
}
