//! Condition estimates for the monomial design matrix and for a built basis.
//!
//! The monomial Gram matrix `G = V^T V` on `n` equidistant points of `[0, 1]`
//! is formed and inverted exactly in rational arithmetic, so `lambda_min(G)`
//! can be found as `1 / lambda_max(G^-1)` even when it is far below the `f64`
//! resolution of `G` itself.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::basis::OrthoBasis;
use crate::error::{Error, Result};
use crate::summation::dot_compensated;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionEstimate {
    pub points: usize,
    pub max_degree: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Spectral condition number of the design matrix, `sqrt(lambda_max / lambda_min)` of its Gram matrix.
    pub condition: f64,
}

const POWER_ITERATIONS: usize = 500;

/// Largest eigenvalue of a symmetric positive definite matrix.
fn power_iteration(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w: Vec<f64> = a.iter().map(|row| dot_compensated(row, &v)).collect();
        let norm = crate::summation::norm2(&w);
        if norm == 0.0 {
            return 0.0;
        }
        let next = dot_compensated(&v, &w);
        v = w.into_iter().map(|x| x / norm).collect();
        let settled = (next - lambda).abs() <= 1e-15 * next.abs();
        lambda = next;
        if settled {
            break;
        }
    }
    lambda
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn invert_exact(mut a: Vec<Vec<BigRational>>) -> Result<Vec<Vec<BigRational>>> {
    let n = a.len();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::params("singular Gram matrix"))?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                let d = &f * &a[col][j];
                a[r][j] -= d;
                let d = &f * &inv[col][j];
                inv[r][j] -= d;
            }
        }
    }
    Ok(inv)
}

/// Condition of the Vandermonde matrix of degrees `0..points-1` on the
/// points `{0, 1/(points-1), ..., 1}`.
pub fn monomial_condition(points: usize) -> Result<ConditionEstimate> {
    if points < 2 {
        return Err(Error::params("need at least 2 points"));
    }
    let denom = BigInt::from(points - 1);
    let xs: Vec<BigRational> = (0..points)
        .map(|i| BigRational::new(BigInt::from(i), denom.clone()))
        .collect();
    // G[i][k] = sum_j x_j^(i+k): only the 2n - 1 power sums are distinct.
    let mut power_sums = Vec::with_capacity(2 * points - 1);
    let mut powers: Vec<BigRational> = vec![BigRational::one(); points];
    for _ in 0..2 * points - 1 {
        power_sums.push(powers.iter().fold(BigRational::zero(), |acc, p| acc + p));
        for (p, x) in powers.iter_mut().zip(&xs) {
            *p = &*p * x;
        }
    }
    let gram: Vec<Vec<BigRational>> = (0..points)
        .map(|i| (0..points).map(|k| power_sums[i + k].clone()).collect())
        .collect();
    let gram_f: Vec<Vec<f64>> = gram.iter().map(|r| r.iter().map(to_f64).collect()).collect();
    let inv = invert_exact(gram)?;
    let inv_f: Vec<Vec<f64>> = inv.iter().map(|r| r.iter().map(to_f64).collect()).collect();
    let lambda_max = power_iteration(&gram_f);
    let lambda_min = 1.0 / power_iteration(&inv_f);
    Ok(ConditionEstimate {
        points,
        max_degree: points - 1,
        lambda_max,
        lambda_min,
        condition: (lambda_max / lambda_min).sqrt(),
    })
}

/// Gershgorin bound on the condition number of the basis Gram matrix.
pub fn basis_gram_condition(basis: &OrthoBasis) -> f64 {
    let cols: Vec<&[f64]> = basis.columns().collect();
    let radius = (0..cols.len())
        .map(|i| {
            (0..cols.len())
                .map(|k| {
                    let d = dot_compensated(cols[i], cols[k]);
                    if i == k {
                        (d - 1.0).abs()
                    } else {
                        d.abs()
                    }
                })
                .sum::<f64>()
        })
        .fold(0.0f64, f64::max);
    if radius >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 + radius) / (1.0 - radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_condition_matches_closed_form() {
        // V = [[1, 0], [1, 1]], G = [[2, 1], [1, 1]].
        let c = monomial_condition(2).unwrap();
        let s5 = 5f64.sqrt();
        assert!((c.lambda_max - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((c.lambda_min - (3.0 - s5) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_inverse_is_inverse() {
        let m: Vec<Vec<BigRational>> = [[4, 2, 1], [2, 3, 0], [1, 0, 5]]
            .iter()
            .map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
            .collect();
        let inv = invert_exact(m.clone()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s = (0..3).fold(BigRational::zero(), |a, k| a + &m[i][k] * &inv[k][j]);
                assert_eq!(s, if i == j { BigRational::one() } else { BigRational::zero() });
            }
        }
    }
}
