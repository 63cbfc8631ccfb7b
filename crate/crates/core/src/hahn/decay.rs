//! Endpoint-decay estimates for `Q_n^N` at small integer arguments.
//!
//! At an integer point `x = m` only the first `min(m, n) + 1` summands of the
//! closed form survive. Their absolute values `q(k)` rise and then fall with
//! `k`; the largest one bounds `|Q_n^N(m)|` up to a factor `m`.

use serde::Serialize;

use super::{hahn_norm_sq_ln, hahn_value_log, HahnParams};
use crate::error::{Error, Result};

/// Summands `(-1)^k q(k)` of `Q_n^N(m)`, `k = 0..=min(m, n)`.
#[derive(Debug, Clone, Serialize)]
pub struct SummandProfile {
    pub upper: usize,
    pub degree: usize,
    pub m: usize,
    /// Signed summand values; may be infinite for very large parameters,
    /// in which case `ln_abs` is authoritative.
    pub values: Vec<f64>,
    pub ln_abs: Vec<f64>,
    pub peak_index: usize,
    pub peak_abs: f64,
    pub peak_ln_abs: f64,
    /// Whether the ratio scan was abandoned for a full scan.
    pub used_full_scan: bool,
}

fn check(upper: usize, degree: usize, m: usize) -> Result<()> {
    HahnParams::new(upper, degree)?;
    if m > degree {
        return Err(Error::params(format!(
            "m = {m} exceeds degree n = {degree}; only m <= n is supported"
        )));
    }
    Ok(())
}

/// `|q(k) / q(k-1)| = (n-k+1)(n+k)(m-k+1) / (k^2 (N-k+1))`.
pub fn summand_ratio(upper: usize, degree: usize, m: usize, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::params("summand ratio is undefined at k = 0"));
    }
    if k > m.min(degree) || k > upper {
        return Err(Error::params(format!(
            "k = {k} outside 1..=min(m, n) = 1..={}",
            m.min(degree)
        )));
    }
    let (n, mf, kf, big) = (degree as f64, m as f64, k as f64, upper as f64);
    Ok((n - kf + 1.0) * (n + kf) * (mf - kf + 1.0) / (kf * kf * (big - kf + 1.0)))
}

pub fn summand_profile(upper: usize, degree: usize, m: usize) -> Result<SummandProfile> {
    check(upper, degree, m)?;
    let last = m.min(degree);
    let mut ln_abs = Vec::with_capacity(last + 1);
    let mut ratios = Vec::with_capacity(last);
    ln_abs.push(0.0);
    for k in 1..=last {
        let r = summand_ratio(upper, degree, m, k)?;
        ratios.push(r);
        ln_abs.push(ln_abs[k - 1] + r.ln());
    }
    let values = ln_abs
        .iter()
        .enumerate()
        .map(|(k, l)| if k % 2 == 0 { l.exp() } else { -l.exp() })
        .collect();

    // The ratio drops through 1 once if the summands are unimodal.
    let first_drop = ratios.iter().position(|&r| r <= 1.0);
    let unimodal = match first_drop {
        Some(i) => ratios[i..].iter().all(|&r| r <= 1.0),
        None => true,
    };
    let (peak_index, used_full_scan) = if unimodal {
        (first_drop.unwrap_or(last), false)
    } else {
        let idx = ln_abs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (idx, true)
    };
    let peak_ln_abs = ln_abs[peak_index];
    Ok(SummandProfile {
        upper,
        degree,
        m,
        values,
        ln_abs,
        peak_index,
        peak_abs: peak_ln_abs.exp(),
        peak_ln_abs,
        used_full_scan,
    })
}

/// The cubic whose root in `(0, m+1)` marks where the summand ratio crosses 1,
/// held in the substituted form `2k^3 - (N'+m')k^2 + (m'-n')k + m'n'` with
/// `N' = N+2`, `n' = n(n+1)`, `m' = m+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic {
    pub n_shift: f64,
    pub n_prod: f64,
    pub m_shift: f64,
}

impl Cubic {
    pub fn new(upper: usize, degree: usize, m: usize) -> Self {
        let n = degree as f64;
        Cubic {
            n_shift: upper as f64 + 2.0,
            n_prod: n * (n + 1.0),
            m_shift: m as f64 + 1.0,
        }
    }

    pub fn eval(&self, k: f64) -> f64 {
        let Cubic {
            n_shift,
            n_prod,
            m_shift,
        } = *self;
        ((2.0 * k - (n_shift + m_shift)) * k + (m_shift - n_prod)) * k + m_shift * n_prod
    }

    pub fn derivative(&self, k: f64) -> f64 {
        6.0 * k * k - 2.0 * (self.n_shift + self.m_shift) * k + (self.m_shift - self.n_prod)
    }

    pub fn second_derivative(&self, k: f64) -> f64 {
        2.0 * (6.0 * k - self.n_shift - self.m_shift)
    }
}

/// `f(k) = 2k^3 - (N+m+3)k^2 + ((m+1) - n(n+1))k + (m+1)n(n+1)`.
pub fn cubic_f(upper: usize, degree: usize, m: usize, k: f64) -> f64 {
    let (big, n, mf) = (upper as f64, degree as f64, m as f64);
    let np = n * (n + 1.0);
    2.0 * k.powi(3) - (big + mf + 3.0) * k * k + ((mf + 1.0) - np) * k + (mf + 1.0) * np
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootBounds {
    /// Secant estimate from `k0 = m+1`, `k1 = 0`.
    pub lower: f64,
    /// One Newton step from `k0 = m+1`.
    pub upper: f64,
    /// `n >= N/2` and `m <= N/10`, where `f` is decreasing and concave on
    /// `(0, m+1)` and the two estimates are guaranteed to bracket the root.
    pub in_regime: bool,
}

pub fn root_bounds(upper: usize, degree: usize, m: usize) -> Result<RootBounds> {
    check(upper, degree, m)?;
    let c = Cubic::new(upper, degree, m);
    let Cubic {
        n_shift,
        n_prod,
        m_shift,
    } = c;

    let secant_den = n_prod - (m_shift + 1.0 - n_shift) * m_shift;
    if secant_den == 0.0 {
        return Err(Error::params("secant step has a zero denominator"));
    }
    let lower = m_shift * n_prod / secant_den;

    let slope = c.derivative(m_shift);
    if slope == 0.0 {
        return Err(Error::params("Newton step has a zero derivative"));
    }
    let upper_est = m_shift - c.eval(m_shift) / slope;

    let in_regime = 2 * degree >= upper && 10 * m <= upper;
    if !in_regime {
        log::warn!(
            "root bounds for N={upper}, n={degree}, m={m} are outside the n >= N/2, m <= N/10 regime"
        );
    }
    Ok(RootBounds {
        lower,
        upper: upper_est,
        in_regime,
    })
}

/// `m * max_k |q(k)|`, normalized by `sqrt(h_n^N)` so that it bounds `|Q^_n^N(m)|`.
pub fn decay_bound(upper: usize, degree: usize, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::params("decay bound requires m >= 1"));
    }
    let profile = summand_profile(upper, degree, m)?;
    let p = HahnParams::new(upper, degree)?;
    Ok(m as f64 * (profile.peak_ln_abs - 0.5 * hahn_norm_sq_ln(p)).exp())
}

/// One row of the decay table: `(m, k~, |Q^(m)|, m q~)`, both values normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRow {
    pub m: usize,
    pub peak_index: usize,
    pub abs_value: f64,
    /// `m q~ / sqrt(h)`; for `m = 0` the sum has a single term and this is
    /// the value itself.
    pub bound: f64,
}

pub fn decay_row(upper: usize, degree: usize, m: usize) -> Result<DecayRow> {
    let profile = summand_profile(upper, degree, m)?;
    let p = HahnParams::new(upper, degree)?;
    let ln_h = hahn_norm_sq_ln(p);
    let q = hahn_value_log(p, m as f64)?;
    let abs_value = if q.sign == 0 {
        0.0
    } else {
        (q.ln_abs - 0.5 * ln_h).exp()
    };
    let bound = if m == 0 {
        abs_value
    } else {
        decay_bound(upper, degree, m)?
    };
    Ok(DecayRow {
        m,
        peak_index: profile.peak_index,
        abs_value,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn profile_peaks_match_table() {
        assert_eq!(summand_profile(100, 75, 5).unwrap().peak_index, 5);
        assert_eq!(summand_profile(100, 75, 8).unwrap().peak_index, 7);
    }

    #[test]
    fn profile_m_zero() {
        let p = summand_profile(40, 20, 0).unwrap();
        assert_eq!(p.values, vec![1.0]);
        assert_eq!(p.peak_index, 0);
        assert_eq!(p.peak_abs, 1.0);
    }

    #[test]
    fn profile_rejects_m_above_n() {
        assert!(summand_profile(100, 10, 11).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_relative_eq!(summand_ratio(100, 75, 5, 1).unwrap(), 285.0, max_relative = 1e-14);
        assert_relative_eq!(summand_ratio(1, 1, 1, 1).unwrap(), 2.0, max_relative = 1e-14);
        assert!(summand_ratio(100, 75, 5, 0).is_err());
    }

    #[test]
    fn ratio_below_one_means_smaller_summand() {
        let profile = summand_profile(50, 37, 5).unwrap();
        for k in 1..=5 {
            let r = summand_ratio(50, 37, 5, k).unwrap();
            let shrinks = profile.values[k].abs() <= profile.values[k - 1].abs();
            assert_eq!(r <= 1.0, shrinks, "k = {k}");
        }
    }

    #[test]
    fn cubic_endpoint_values() {
        let (big, n, m) = (100, 75, 10);
        assert_eq!(cubic_f(big, n, m, 0.0), 11.0 * 75.0 * 76.0);
        assert_eq!(cubic_f(big, n, m, 11.0), -10890.0);
        let c = Cubic::new(big, n, m);
        for k in [0.0, 1.5, 7.0, 11.0] {
            assert_relative_eq!(c.eval(k), cubic_f(big, n, m, k), max_relative = 1e-12);
        }
    }

    #[test]
    fn cubic_changes_sign() {
        assert!(cubic_f(100, 75, 10, 0.0) > 0.0);
        assert!(cubic_f(100, 75, 10, 11.0) < 0.0);
    }

    #[test]
    fn root_bounds_bracket_sign_change() {
        let b = root_bounds(100, 75, 5).unwrap();
        assert!(b.in_regime);
        assert!(cubic_f(100, 75, 5, b.lower) > 0.0);
        assert!(cubic_f(100, 75, 5, b.upper) < 0.0);
        assert!(b.lower <= b.upper);
    }

    #[test]
    fn root_bounds_flag_regime() {
        let b = root_bounds(100, 30, 25).unwrap();
        assert!(!b.in_regime);
    }

    #[test]
    fn decay_bound_first_row() {
        assert_relative_eq!(decay_bound(100, 75, 1).unwrap(), 1.18e-12, max_relative = 2e-2);
        assert!(decay_bound(100, 75, 0).is_err());
    }
}
