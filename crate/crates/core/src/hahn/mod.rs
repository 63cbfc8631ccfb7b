//! Closed-form Hahn (discrete Chebyshev) polynomials with unit weights.
//!
//! `Q_n^N(x) = sum_k (-1)^k (n)_{-k} (n+1)_k (x)_{-k} / ((k!)^2 (N)_{-k})` on the
//! lattice `{0, 1, ..., N}`. Individual summands range over dozens of decades
//! for moderate `N`, so every term is carried as a sign and a log-magnitude and
//! only rescaled to linear space (relative to the largest term) for the final
//! compensated sum.

mod decay;
pub mod exact;

pub use decay::{
    cubic_f, decay_bound, decay_row, root_bounds, summand_profile, summand_ratio, Cubic, DecayRow,
    RootBounds, SummandProfile,
};

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::summation::sum_compensated;

/// Lattice size and degree of a Hahn polynomial with `alpha = beta = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HahnParams {
    /// Lattice upper index `N`; the grid has `N + 1` points.
    pub upper: usize,
    /// Polynomial degree `n <= N`.
    pub degree: usize,
}

impl HahnParams {
    pub fn new(upper: usize, degree: usize) -> Result<Self> {
        if upper == 0 {
            return Err(Error::params("lattice upper index N must be at least 1"));
        }
        if degree > upper {
            return Err(Error::params(format!(
                "degree {degree} exceeds lattice upper index {upper}"
            )));
        }
        Ok(HahnParams { upper, degree })
    }
}

/// A real number stored as `sign * exp(ln_abs)`; `sign == 0` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: i8,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            SignedLog::ZERO
        } else {
            SignedLog {
                sign: if x > 0.0 { 1 } else { -1 },
                ln_abs: x.abs().ln(),
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.ln_abs.exp()
        }
    }

    pub fn mul(self, other: SignedLog) -> SignedLog {
        if self.sign == 0 || other.sign == 0 {
            return SignedLog::ZERO;
        }
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs + other.ln_abs,
        }
    }

    pub fn div(self, other: SignedLog) -> SignedLog {
        assert!(other.sign != 0, "division by zero in log-sign arithmetic");
        if self.sign == 0 {
            return SignedLog::ZERO;
        }
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs - other.ln_abs,
        }
    }

    pub fn negate_if(self, flip: bool) -> SignedLog {
        if flip {
            SignedLog {
                sign: -self.sign,
                ..self
            }
        } else {
            self
        }
    }
}

/// Sum terms given in log-sign form without overflow.
pub fn sum_signed_logs(terms: &[SignedLog]) -> SignedLog {
    let peak = terms
        .iter()
        .filter(|t| t.sign != 0)
        .map(|t| t.ln_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return SignedLog::ZERO;
    }
    let mut scaled: Vec<f64> = terms
        .iter()
        .filter(|t| t.sign != 0)
        .map(|t| f64::from(t.sign) * (t.ln_abs - peak).exp())
        .collect();
    scaled.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let s = sum_compensated(scaled);
    let mut out = SignedLog::from_f64(s);
    out.ln_abs += peak;
    out
}

/// Generalized Pochhammer symbol: rising product for `k > 0`, `1` for `k = 0`,
/// falling product `a (a-1) ... (a+k+1)` for `k < 0`.
///
/// Computed by direct multiplication; overflows to infinity for large arguments.
pub fn pochhammer(a: f64, k: i64) -> f64 {
    match k.cmp(&0) {
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => (0..k).map(|i| a + i as f64).product(),
        std::cmp::Ordering::Less => (0..-k).map(|i| a - i as f64).product(),
    }
}

/// `ln |Gamma(z)|` for any real `z` that is not a non-positive integer.
fn ln_abs_gamma(z: f64) -> f64 {
    if z >= 0.5 {
        ln_gamma(z)
    } else {
        // Reflection: Gamma(z) Gamma(1 - z) = pi / sin(pi z).
        PI.ln() - (PI * z).sin().abs().ln() - ln_gamma(1.0 - z)
    }
}

/// Generalized Pochhammer symbol in log-sign form, via log-gamma.
pub fn ln_pochhammer(a: f64, k: i64) -> SignedLog {
    if k == 0 {
        return SignedLog {
            sign: 1,
            ln_abs: 0.0,
        };
    }
    // (a)_{-k} = (a - k + 1)_k turns every case into a rising product.
    let (start, len) = if k > 0 {
        (a, k as u64)
    } else {
        (a + k as f64 + 1.0, (-k) as u64)
    };
    let end = start + len as f64 - 1.0;
    if start <= 0.0 && end >= 0.0 && start.fract() == 0.0 {
        return SignedLog::ZERO;
    }
    let negatives = if start >= 0.0 {
        0
    } else {
        ((-start).ceil() as u64).min(len)
    };
    let sign = if negatives % 2 == 0 { 1 } else { -1 };
    let ln_abs = if start > 0.0 {
        ln_gamma(start + len as f64) - ln_gamma(start)
    } else if start.fract() == 0.0 {
        // All factors are negative integers: |start| (|start|-1) ... (|end|).
        let top = -start;
        let bottom = -end;
        ln_gamma(top + 1.0) - ln_gamma(bottom)
    } else {
        ln_abs_gamma(start + len as f64) - ln_abs_gamma(start)
    };
    SignedLog { sign, ln_abs }
}

fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Summand `k` of the closed form, in log-sign form.
fn summand(p: HahnParams, x: f64, k: usize) -> SignedLog {
    let n = p.degree as f64;
    let big = p.upper as f64;
    let k_i = k as i64;
    let x_part = ln_pochhammer(x, -k_i);
    if x_part.sign == 0 {
        return SignedLog::ZERO;
    }
    // (n)_{-k} = n!/(n-k)!, (n+1)_k = (n+k)!/n!, (N)_{-k} = N!/(N-k)!
    let ln_int = (ln_gamma(n + k as f64 + 1.0) - ln_gamma(n - k as f64 + 1.0))
        - 2.0 * ln_factorial(k)
        - (ln_gamma(big + 1.0) - ln_gamma(big - k as f64 + 1.0));
    SignedLog {
        sign: x_part.sign,
        ln_abs: x_part.ln_abs + ln_int,
    }
    .negate_if(k % 2 == 1)
}

/// `Q_n^N(x)` in log-sign form.
pub fn hahn_value_log(p: HahnParams, x: f64) -> Result<SignedLog> {
    let p = HahnParams::new(p.upper, p.degree)?;
    // Q_n(N - x) = (-1)^n Q_n(x); the sum cancels far less near x = 0.
    let big = p.upper as f64;
    if x > 0.5 * big {
        return Ok(hahn_value_log(p, big - x)?.negate_if(p.degree % 2 == 1));
    }
    let terms: Vec<SignedLog> = (0..=p.degree).map(|k| summand(p, x, k)).collect();
    Ok(sum_signed_logs(&terms))
}

/// `Q_n^N(x)` for real `x`. May overflow to infinity between grid points for
/// large `N`; use [`hahn_value_log`] or [`normalized_hahn_value`] there.
pub fn hahn_value(p: HahnParams, x: f64) -> Result<f64> {
    hahn_value_log(p, x).map(SignedLog::to_f64)
}

/// `ln h_n^N` where `h_n^N = (N+1)_{n+1} / ((2n+1) (N)_{-n})` is the squared norm.
pub fn hahn_norm_sq_ln(p: HahnParams) -> f64 {
    let n = p.degree as f64;
    let big = p.upper as f64;
    let rising = ln_gamma(big + n + 2.0) - ln_gamma(big + 1.0);
    let falling = ln_gamma(big + 1.0) - ln_gamma(big - n + 1.0);
    rising - (2.0 * n + 1.0).ln() - falling
}

pub fn hahn_norm_sq(p: HahnParams) -> f64 {
    hahn_norm_sq_ln(p).exp()
}

/// `Q_n^N(x) / sqrt(h_n^N)`, the polynomial with unit norm on the grid.
pub fn normalized_hahn_value(p: HahnParams, x: f64) -> Result<f64> {
    let mut v = hahn_value_log(p, x)?;
    v.ln_abs -= 0.5 * hahn_norm_sq_ln(p);
    Ok(v.to_f64())
}
