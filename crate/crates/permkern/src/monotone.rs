//! A deliberately tiny expression language for strictly monotone functions
//! used as column perturbations, e.g. `monotone:k->2-exp(-k)`.
//!
//! The catalog is fixed — affine, power-plus-constant, and a saturating
//! exponential — because each member carries an analytic monotonicity
//! certificate and a cancellation-free formula for differences f(t1) - f(t3).
//! That difference formula is what keeps deep-tail scans honest: at large
//! indices the saturating family's differences underflow any direct
//! subtraction, but their sign and log-magnitude remain exactly computable.

use crate::error::{Error, Result};
use std::fmt;

const MAX_EXPR_LEN: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneFn {
    /// a + b*k with b != 0.
    Affine { a: f64, b: f64 },
    /// q + k^beta with beta > 0, defined for k >= 0.
    PowerPlusConst { q: f64, beta: f64 },
    /// c - exp(-k); strictly increasing, saturating at c.
    ExpSaturating { c: f64 },
}

/// Sign and natural-log magnitude of a nonzero real; the pair survives far
/// past the underflow range of f64 values themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub ln_mag: f64,
}

impl SignedLog {
    pub fn from_value(v: f64) -> SignedLog {
        SignedLog {
            sign: if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            },
            ln_mag: v.abs().ln(),
        }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.ln_mag.exp()
    }

    pub fn mul(&self, other: &SignedLog) -> SignedLog {
        SignedLog {
            sign: self.sign * other.sign,
            ln_mag: self.ln_mag + other.ln_mag,
        }
    }
}

impl MonotoneFn {
    /// Parse the canonical `monotone:k-><expr>` form.
    pub fn parse(input: &str) -> Result<MonotoneFn> {
        if input.len() > MAX_EXPR_LEN {
            return Err(Error::MonotoneParse {
                reason: format!("expression longer than {MAX_EXPR_LEN} bytes"),
            });
        }
        let compact: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        let expr = compact
            .strip_prefix("monotone:k->")
            .ok_or_else(|| Error::MonotoneParse {
                reason: "expected 'monotone:k->' prefix".into(),
            })?;
        parse_expr(expr)
    }

    /// Evaluate at t. Errors on domain violations or non-finite results.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let v = match *self {
            MonotoneFn::Affine { a, b } => a + b * t,
            MonotoneFn::PowerPlusConst { q, beta } => {
                if !(t >= 0.0) {
                    return Err(Error::MonotoneParse {
                        reason: format!("power form needs t >= 0, got {t}"),
                    });
                }
                q + t.powf(beta)
            }
            MonotoneFn::ExpSaturating { c } => c - (-t).exp(),
        };
        if !v.is_finite() {
            return Err(Error::MonotoneParse {
                reason: format!("evaluation at t = {t} is not finite"),
            });
        }
        Ok(v)
    }

    /// f(t1) - f(t3) for t1 < t3, as sign and log-magnitude.
    ///
    /// Computed without subtractive cancellation, so the result is meaningful
    /// even where the two values agree to machine precision (or underflow).
    pub fn diff_log(&self, t1: f64, t3: f64) -> Result<SignedLog> {
        if !(t1 < t3) {
            return Err(Error::MonotoneParse {
                reason: format!("difference needs t1 < t3, got {t1}, {t3}"),
            });
        }
        let sl = match *self {
            MonotoneFn::Affine { b, .. } => SignedLog {
                sign: -b.signum(),
                ln_mag: b.abs().ln() + (t3 - t1).ln(),
            },
            MonotoneFn::PowerPlusConst { beta, .. } => {
                if !(t1 > 0.0) {
                    return Err(Error::MonotoneParse {
                        reason: format!("power difference needs t1 > 0, got {t1}"),
                    });
                }
                // t1^b - t3^b = t3^b * expm1(b ln(t1/t3)) with the expm1 factor negative.
                let inner = (beta * (t1 / t3).ln()).exp_m1();
                SignedLog {
                    sign: -1.0,
                    ln_mag: beta * t3.ln() + (-inner).ln(),
                }
            }
            MonotoneFn::ExpSaturating { .. } => {
                // e^{-t3} - e^{-t1} = -e^{-t1} (1 - e^{-(t3-t1)}).
                let inner = (-(t3 - t1)).exp_m1();
                SignedLog {
                    sign: -1.0,
                    ln_mag: -t1 + (-inner).ln(),
                }
            }
        };
        Ok(sl)
    }

    /// Every catalog member is strictly monotone by construction; this
    /// reports the direction (+1 increasing, -1 decreasing).
    pub fn direction(&self) -> f64 {
        match *self {
            MonotoneFn::Affine { b, .. } => b.signum(),
            MonotoneFn::PowerPlusConst { .. } => 1.0,
            MonotoneFn::ExpSaturating { .. } => 1.0,
        }
    }
}

impl fmt::Display for MonotoneFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "monotone:k->")?;
        match *self {
            MonotoneFn::Affine { a, b } => {
                if a == 0.0 && b == 1.0 {
                    write!(f, "k")
                } else if a == 0.0 {
                    write!(f, "{b}*k")
                } else {
                    write!(f, "{a}+{b}*k")
                }
            }
            MonotoneFn::PowerPlusConst { q, beta } => {
                if q == 0.0 {
                    write!(f, "k^{beta}")
                } else {
                    write!(f, "{q}+k^{beta}")
                }
            }
            MonotoneFn::ExpSaturating { c } => write!(f, "{c}-exp(-k)"),
        }
    }
}

/// Longest-prefix f64 scan; rejects non-finite tokens like "inf".
fn scan_number(s: &str) -> Option<(f64, &str)> {
    let bytes = s.as_bytes();
    let mut end = bytes.len().min(64);
    while end > 0 {
        if s.is_char_boundary(end) {
            if let Ok(v) = s[..end].parse::<f64>() {
                if v.is_finite() {
                    return Some((v, &s[end..]));
                }
            }
        }
        end -= 1;
    }
    None
}

fn parse_expr(expr: &str) -> Result<MonotoneFn> {
    let fail = |reason: &str| Error::MonotoneParse {
        reason: reason.to_string(),
    };

    if expr == "k" {
        return Ok(MonotoneFn::Affine { a: 0.0, b: 1.0 });
    }
    if let Some(rest) = expr.strip_prefix("k^") {
        let (beta, tail) = scan_number(rest).ok_or_else(|| fail("expected exponent after 'k^'"))?;
        if !tail.is_empty() {
            return Err(fail("trailing characters after exponent"));
        }
        return finish_power(0.0, beta);
    }

    let (first, rest) = scan_number(expr).ok_or_else(|| fail("expected a number or 'k'"))?;

    if rest.is_empty() {
        return Err(fail("a constant is not strictly monotone"));
    }
    if let Some(tail) = rest.strip_prefix("*k") {
        if !tail.is_empty() {
            return Err(fail("trailing characters after '*k'"));
        }
        return finish_affine(0.0, first);
    }
    if let Some(after_plus) = rest.strip_prefix('+') {
        if after_plus == "k" {
            return finish_affine(first, 1.0);
        }
        if let Some(pow_rest) = after_plus.strip_prefix("k^") {
            let (beta, tail) =
                scan_number(pow_rest).ok_or_else(|| fail("expected exponent after 'k^'"))?;
            if !tail.is_empty() {
                return Err(fail("trailing characters after exponent"));
            }
            return finish_power(first, beta);
        }
        let (b, tail) = scan_number(after_plus).ok_or_else(|| fail("expected slope after '+'"))?;
        let tail = tail
            .strip_prefix("*k")
            .ok_or_else(|| fail("expected '*k' after slope"))?;
        if !tail.is_empty() {
            return Err(fail("trailing characters after '*k'"));
        }
        return finish_affine(first, b);
    }
    if let Some(after_minus) = rest.strip_prefix('-') {
        if after_minus == "exp(-k)" {
            return Ok(MonotoneFn::ExpSaturating { c: first });
        }
        let (b, tail) = scan_number(after_minus).ok_or_else(|| fail("expected slope after '-'"))?;
        let tail = tail
            .strip_prefix("*k")
            .ok_or_else(|| fail("expected '*k' after slope"))?;
        if !tail.is_empty() {
            return Err(fail("trailing characters after '*k'"));
        }
        return finish_affine(first, -b);
    }
    Err(fail("unrecognized expression shape"))
}

fn finish_affine(a: f64, b: f64) -> Result<MonotoneFn> {
    if b == 0.0 {
        return Err(Error::MonotoneParse {
            reason: "affine slope must be nonzero".into(),
        });
    }
    Ok(MonotoneFn::Affine { a, b })
}

fn finish_power(q: f64, beta: f64) -> Result<MonotoneFn> {
    if !(beta > 0.0) {
        return Err(Error::MonotoneParse {
            reason: "power exponent must be positive".into(),
        });
    }
    Ok(MonotoneFn::PowerPlusConst { q, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_catalog_members() {
        assert_eq!(
            MonotoneFn::parse("monotone:k->k").unwrap(),
            MonotoneFn::Affine { a: 0.0, b: 1.0 }
        );
        assert_eq!(
            MonotoneFn::parse("monotone:k->1+0.5*k").unwrap(),
            MonotoneFn::Affine { a: 1.0, b: 0.5 }
        );
        assert_eq!(
            MonotoneFn::parse("monotone:k->1+k^2.5").unwrap(),
            MonotoneFn::PowerPlusConst { q: 1.0, beta: 2.5 }
        );
        assert_eq!(
            MonotoneFn::parse("monotone:k->2-exp(-k)").unwrap(),
            MonotoneFn::ExpSaturating { c: 2.0 }
        );
    }

    #[test]
    fn rejects_junk() {
        for bad in [
            "",
            "k",
            "monotone:k->",
            "monotone:k->3",
            "monotone:k->0*k",
            "monotone:k->k^0",
            "monotone:k->k^-2",
            "monotone:k->inf*k",
            "monotone:k->1+2*k+3",
            "monotone:k->exp(k)",
        ] {
            assert!(MonotoneFn::parse(bad).is_err(), "should reject {bad:?}");
        }
    }

    #[test]
    fn display_round_trips() {
        for f in [
            MonotoneFn::Affine { a: 0.0, b: 1.0 },
            MonotoneFn::Affine { a: 1.5, b: -0.25 },
            MonotoneFn::PowerPlusConst { q: 1.0, beta: 2.5 },
            MonotoneFn::ExpSaturating { c: 2.0 },
        ] {
            let s = f.to_string();
            assert_eq!(MonotoneFn::parse(&s).unwrap(), f, "via {s}");
        }
    }

    #[test]
    fn diff_log_matches_direct_subtraction_when_representable() {
        let cases = [
            MonotoneFn::Affine { a: 1.0, b: 0.5 },
            MonotoneFn::PowerPlusConst { q: 1.0, beta: 2.5 },
            MonotoneFn::ExpSaturating { c: 2.0 },
        ];
        for f in cases {
            for (t1, t3) in [(1.0, 3.0), (2.0, 2.5), (10.0, 14.0)] {
                let direct = f.eval(t1).unwrap() - f.eval(t3).unwrap();
                let sl = f.diff_log(t1, t3).unwrap();
                assert_relative_eq!(sl.value(), direct, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn diff_log_survives_saturation() {
        let f = MonotoneFn::ExpSaturating { c: 2.0 };
        // Direct subtraction is identically zero here; the log form is not.
        assert_eq!(f.eval(1000.0).unwrap(), f.eval(1002.0).unwrap());
        let sl = f.diff_log(1000.0, 1002.0).unwrap();
        assert_eq!(sl.sign, -1.0);
        assert_relative_eq!(
            sl.ln_mag,
            -1000.0 + (-(-2.0f64).exp_m1()).ln(),
            max_relative = 1e-12
        );
    }
}
