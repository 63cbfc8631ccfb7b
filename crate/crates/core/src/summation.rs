//! Compensated summation helpers.

/// Neumaier-compensated sum.
pub fn sum_compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Dot product with error-free product transformation (Ogita–Rump–Oishi `Dot2`).
///
/// The result is as accurate as if computed in twice the working precision
/// and then rounded.
pub fn dot_compensated(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let t = sum + p;
        let z = t - sum;
        let se = (sum - (t - z)) + (p - z);
        sum = t;
        comp += pe + se;
    }
    sum + comp
}

pub fn norm2(a: &[f64]) -> f64 {
    dot_compensated(a, a).sqrt()
}
