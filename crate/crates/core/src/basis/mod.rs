//! Orthonormal discrete polynomial basis on an arbitrary lattice.
//!
//! Construction seeds every degree with the Legendre polynomial evaluated on
//! the lattice mapped to `[-1, 1]` (bounded by 1 everywhere, unlike monomials),
//! then orthogonalizes against all finished columns with repeated modified
//! Gram-Schmidt sweeps until the column is orthogonal to working precision.
//! On the integer lattice the result is the normalized Hahn family.

mod cache;

pub use cache::{read_basis, write_basis, BasisCache, CACHE_DIR_ENV};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeKind};
use crate::par::{map_collect, Execution};
use crate::real::{DoubleDouble, Real};

/// Re-orthogonalization sweeps allowed per column.
pub const MAX_SWEEPS: usize = 20;

/// A projected column with norm below this is considered linearly dependent.
pub const NORM_FLOOR: f64 = 1e-280;

/// Default tolerance: unit roundoff of `f64`.
pub const DEFAULT_ORTH_TOL: f64 = f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    lattice: Lattice,
    max_degree: usize,
    /// Column-major: column `m` occupies `[m * len, (m + 1) * len)`.
    values: Vec<f64>,
    orth_tol: f64,
    achieved_orth_err: f64,
    sweeps: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramReport {
    pub max_offdiag: f64,
    pub max_norm_dev: f64,
}

impl OrthoBasis {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kind(&self) -> LatticeKind {
        self.lattice.kind()
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Lattice upper index `N`.
    pub fn upper(&self) -> usize {
        self.lattice.upper()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn orth_tol(&self) -> f64 {
        self.orth_tol
    }

    /// Largest `|col_i . col_n| / |u_n|` seen when column `n` was accepted.
    pub fn achieved_orth_err(&self) -> f64 {
        self.achieved_orth_err
    }

    /// Gram-Schmidt sweeps used per column (column 0 reports 0).
    pub fn sweeps(&self) -> &[u32] {
        &self.sweeps
    }

    /// Stopping threshold `2 N orth_tol`.
    pub fn threshold(&self) -> f64 {
        2.0 * self.upper() as f64 * self.orth_tol
    }

    pub fn column(&self, m: usize) -> Result<&[f64]> {
        if m > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree: m,
                max: self.max_degree,
            });
        }
        Ok(self.column_unchecked(m))
    }

    pub(crate) fn column_unchecked(&self, m: usize) -> &[f64] {
        let n = self.len();
        &self.values[m * n..(m + 1) * n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.len())
    }

    /// `Q^_m(x_j)`.
    pub fn value(&self, j: usize, m: usize) -> f64 {
        self.values[m * self.len() + j]
    }

    /// Whether `other` has the same normalized shape as this basis' lattice.
    pub fn is_compatible(&self, other: &Lattice) -> bool {
        if other.len() != self.len() {
            return false;
        }
        let (Ok(a), Ok(b)) = (self.lattice.normalize(), other.normalize()) else {
            return false;
        };
        a.points()
            .iter()
            .zip(b.points())
            .all(|(x, y)| (x - y).abs() <= 1e-12)
    }

    /// Full Gram matrix check: worst off-diagonal product and worst norm deviation.
    pub fn gram_report(&self, exec: Execution) -> GramReport {
        let degrees: Vec<usize> = (0..=self.max_degree).collect();
        let per_col = map_collect(exec, &degrees, |&i| {
            let ci = self.column_unchecked(i);
            let mut off = 0.0f64;
            for j in 0..i {
                off = off.max(f64::dot(ci, self.column_unchecked(j)).abs());
            }
            let dev = (f64::dot(ci, ci).sqrt() - 1.0).abs();
            (off, dev)
        });
        per_col
            .into_iter()
            .fold(GramReport { max_offdiag: 0.0, max_norm_dev: 0.0 }, |acc, (o, d)| GramReport {
                max_offdiag: acc.max_offdiag.max(o),
                max_norm_dev: acc.max_norm_dev.max(d),
            })
    }

    pub(crate) fn from_parts(
        lattice: Lattice,
        max_degree: usize,
        values: Vec<f64>,
        orth_tol: f64,
        achieved_orth_err: f64,
        sweeps: Vec<u32>,
    ) -> Self {
        debug_assert_eq!(values.len(), lattice.len() * (max_degree + 1));
        OrthoBasis {
            lattice,
            max_degree,
            values,
            orth_tol,
            achieved_orth_err,
            sweeps,
        }
    }
}

/// Legendre polynomials `P_0..P_M` evaluated on a lattice already mapped to
/// `[-1, 1]`, one vector per degree. These are not orthogonal on the lattice.
pub fn legendre_seed(normalized: &Lattice, max_degree: usize) -> Result<Vec<Vec<f64>>> {
    legendre_seed_in::<f64>(normalized.points(), max_degree)
}

fn legendre_seed_in<T: Real>(points: &[f64], max_degree: usize) -> Result<Vec<Vec<T>>> {
    if max_degree >= points.len() {
        return Err(Error::DegreeOutOfRange {
            degree: max_degree,
            max: points.len().saturating_sub(1),
        });
    }
    let x: Vec<T> = points.iter().map(|&v| T::from_f64(v)).collect();
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(max_degree + 1);
    cols.push(vec![T::one(); x.len()]);
    if max_degree >= 1 {
        cols.push(x.clone());
    }
    for d in 2..=max_degree {
        let n = (d - 1) as f64;
        let a = T::from_f64(2.0 * n + 1.0);
        let b = T::from_f64(n);
        let c = T::from_f64(n + 1.0);
        let next: Vec<T> = x
            .iter()
            .zip(&cols[d - 1])
            .zip(&cols[d - 2])
            .map(|((&xj, &p1), &p2)| (a * xj * p1 - b * p2) / c)
            .collect();
        cols.push(next);
    }
    Ok(cols)
}

/// Output of the generic builder before conversion to `f64`.
struct Columns<T> {
    cols: Vec<Vec<T>>,
    achieved: f64,
    sweeps: Vec<u32>,
}

fn orthonormalize<T: Real>(lattice: &Lattice, max_degree: usize, orth_tol: f64) -> Result<Columns<T>> {
    let normalized = lattice.normalize()?;
    orthonormalize_points(normalized.points(), max_degree, orth_tol, MAX_SWEEPS)
}

/// Project `seed` once against the finalized columns in double-double.
///
/// Rounding the seed itself to the working format would leave an error of
/// order `eps * |seed|`, while the projected component can be many orders of
/// magnitude smaller than the seed; the first sweep is therefore carried out
/// before rounding.
fn project_extended<T: Real>(seed: &mut [DoubleDouble], cols: &[Vec<T>]) {
    for q in cols {
        let mut c = DoubleDouble::from_f64(0.0);
        for (&u, &qj) in seed.iter().zip(q) {
            c += u * qj.to_dd();
        }
        for (u, &qj) in seed.iter_mut().zip(q) {
            *u -= c * qj.to_dd();
        }
    }
}

fn orthonormalize_points<T: Real>(
    points: &[f64],
    max_degree: usize,
    orth_tol: f64,
    max_sweeps: usize,
) -> Result<Columns<T>> {
    if !(orth_tol > 0.0) {
        return Err(Error::params("orth_tol must be positive"));
    }
    let mut seeds = legendre_seed_in::<DoubleDouble>(points, max_degree)?;
    let threshold = 2.0 * (points.len() - 1) as f64 * orth_tol;

    let mut cols: Vec<Vec<T>> = Vec::with_capacity(max_degree + 1);
    let mut sweeps = vec![0u32; max_degree + 1];
    let mut achieved = 0.0f64;

    let c0: Vec<T> = seeds[0].iter().map(|&v| T::from_dd(v)).collect();
    let norm0 = T::dot(&c0, &c0).sqrt();
    cols.push(c0.into_iter().map(|v| v / norm0).collect());

    for n in 1..=max_degree {
        let mut seed = std::mem::take(&mut seeds[n]);
        project_extended(&mut seed, &cols);
        let mut u: Vec<T> = seed.into_iter().map(T::from_dd).collect();
        let mut used = 1usize;
        let mut projected = true;
        let norm = loop {
            if !projected {
                for q in &cols {
                    let c = T::dot(&u, q);
                    for (uj, &qj) in u.iter_mut().zip(q) {
                        *uj -= c * qj;
                    }
                }
                used += 1;
            }
            projected = false;
            let norm = T::dot(&u, &u).sqrt();
            let norm_f = norm.to_f64();
            if !(norm_f >= NORM_FLOOR) {
                return Err(Error::DegenerateLattice {
                    column: n,
                    norm: norm_f,
                });
            }
            // Measured on the normalized direction so the accepted column
            // satisfies the threshold after scaling.
            let orth_err = cols
                .iter()
                .map(|q| T::dot(&u, q).to_f64().abs())
                .fold(0.0, f64::max)
                / norm_f;
            if orth_err <= threshold {
                achieved = achieved.max(orth_err);
                break norm;
            }
            if used >= max_sweeps {
                return Err(Error::NonConvergence {
                    column: n,
                    sweeps: used,
                    orth_err,
                });
            }
        };
        let mut col: Vec<T> = u.into_iter().map(|v| v / norm).collect();
        // Columns inherit the positive leading coefficient of the Legendre
        // seed, hence are positive at x_N. Only flip on a resolvable sign.
        let last = col[col.len() - 1].to_f64();
        let scale = col.iter().map(|v| v.to_f64().abs()).fold(0.0, f64::max);
        if last < 0.0 && last.abs() > 1e3 * T::EPSILON * scale {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        sweeps[n] = used as u32;
        cols.push(col);
    }
    Ok(Columns {
        cols,
        achieved,
        sweeps,
    })
}

fn finish<T: Real>(lattice: &Lattice, max_degree: usize, orth_tol: f64, out: Columns<T>) -> OrthoBasis {
    let values = out
        .cols
        .into_iter()
        .flat_map(|c| c.into_iter().map(Real::to_f64))
        .collect();
    OrthoBasis::from_parts(
        lattice.clone(),
        max_degree,
        values,
        orth_tol,
        out.achieved,
        out.sweeps,
    )
}

/// Build `Q^_0..Q^_M` on `lattice` in working precision.
pub fn build_basis(lattice: &Lattice, max_degree: usize, orth_tol: f64) -> Result<OrthoBasis> {
    let out = orthonormalize::<f64>(lattice, max_degree, orth_tol)?;
    Ok(finish(lattice, max_degree, orth_tol, out))
}

/// Same construction carried out in double-double arithmetic and rounded to
/// `f64` at the end. `orth_tol` is interpreted relative to the extended format,
/// so pass something near [`DoubleDouble::EPSILON`](crate::real::DoubleDouble).
pub fn build_basis_extended(
    lattice: &Lattice,
    max_degree: usize,
    orth_tol: f64,
) -> Result<OrthoBasis> {
    let out = orthonormalize::<DoubleDouble>(lattice, max_degree, orth_tol)?;
    Ok(finish(lattice, max_degree, orth_tol, out))
}
