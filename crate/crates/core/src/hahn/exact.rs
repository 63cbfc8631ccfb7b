//! Exact rational evaluation of `Q_n^N(x)` and `h_n^N` for small lattices.
//!
//! Everything in the closed form is rational at rational `x`, so this path
//! carries no rounding at all until the final conversion of the normalized
//! value. It is slow (big integers) and meant as a reference for `N <= 40`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::HahnParams;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `Q_n^N(x)` exactly, via the term ratio
/// `t_k / t_{k-1} = -(n-k+1)(n+k)(x-k+1) / (k^2 (N-k+1))`.
pub fn exact_hahn_value(p: HahnParams, x: &BigRational) -> BigRational {
    let n = p.degree as i64;
    let big = p.upper as i64;
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for k in 1..=n {
        let num = int((n - k + 1) * (n + k)) * (x - int(k - 1));
        let den = int(k * k * (big - k + 1));
        term = -(term * num / den);
        if term.is_zero() {
            break;
        }
        sum += &term;
    }
    sum
}

/// `h_n^N = (N+1)_{n+1} / ((2n+1) (N)_{-n})` exactly.
pub fn exact_norm_sq(p: HahnParams) -> BigRational {
    let n = p.degree as i64;
    let big = p.upper as i64;
    let rising: BigInt = (0..=n).map(|i| BigInt::from(big + 1 + i)).product();
    let falling: BigInt = (0..n).map(|i| BigInt::from(big - i)).product();
    BigRational::new(rising, BigInt::from(2 * n + 1) * falling)
}

/// `Q^_n^N(x)` rounded once, as `sign(Q) * sqrt(Q^2 / h)`.
pub fn exact_normalized_value(p: HahnParams, x: &BigRational) -> f64 {
    let q = exact_hahn_value(p, x);
    if q.is_zero() {
        return 0.0;
    }
    let ratio = (&q * &q) / exact_norm_sq(p);
    let mag = ratio.to_f64().unwrap_or(f64::INFINITY).sqrt();
    if q.is_negative() {
        -mag
    } else {
        mag
    }
}

pub fn exact_normalized_at_integer(p: HahnParams, x: i64) -> f64 {
    exact_normalized_value(p, &int(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_polynomials_are_exactly_orthogonal() {
        for big in 1..=10usize {
            for i in 0..=big {
                for j in 0..=i {
                    let pi = HahnParams::new(big, i).unwrap();
                    let pj = HahnParams::new(big, j).unwrap();
                    let mut dot = BigRational::zero();
                    for x in 0..=big as i64 {
                        dot += exact_hahn_value(pi, &int(x)) * exact_hahn_value(pj, &int(x));
                    }
                    if i == j {
                        assert_eq!(dot, exact_norm_sq(pi), "N={big} n={i}");
                    } else {
                        assert!(dot.is_zero(), "N={big} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn degree_one_on_three_points() {
        let p = HahnParams::new(2, 1).unwrap();
        let vals: Vec<BigRational> = (0..3).map(|x| exact_hahn_value(p, &int(x))).collect();
        assert_eq!(vals, vec![int(1), int(0), int(-1)]);
        assert_eq!(exact_norm_sq(p), int(2));
    }
}
