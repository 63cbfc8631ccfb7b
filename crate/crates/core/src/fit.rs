//! Least-squares projection onto an orthonormal basis, trend reconstruction
//! and residues.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::basis::OrthoBasis;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::summation::dot_compensated;

/// Samples `f(t_j)` on a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSeries {
    lattice: Lattice,
    values: Vec<f64>,
    unit: String,
}

impl DataSeries {
    pub fn new(lattice: Lattice, values: Vec<f64>, unit: impl Into<String>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::InvalidSeries(format!(
                "{} values for {} lattice points",
                values.len(),
                lattice.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("value {i} is not finite")));
        }
        Ok(DataSeries {
            lattice,
            values,
            unit: unit.into(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Full projection `b_0..b_M`, in the units of the series.
    pub coefficients: Vec<f64>,
    pub cutoff: usize,
    pub fitted: Vec<f64>,
    pub residue: Vec<f64>,
}

fn check_lattice(basis: &OrthoBasis, series: &DataSeries) -> Result<()> {
    if basis.is_compatible(series.lattice()) {
        Ok(())
    } else {
        Err(Error::LatticeMismatch)
    }
}

/// Mean and max-abs deviation used to condition the series before projection.
fn conditioning(values: &[f64]) -> (f64, f64) {
    let mean = crate::summation::sum_compensated(values.iter().copied()) / values.len() as f64;
    let scale = values.iter().fold(0.0f64, |a, v| a.max((v - mean).abs()));
    (mean, if scale > 0.0 { scale } else { 1.0 })
}

fn project_scaled(basis: &OrthoBasis, scaled: &[f64]) -> Vec<f64> {
    basis.columns().map(|c| dot_compensated(scaled, c)).collect()
}

fn synthesize(basis: &OrthoBasis, coefficients: &[f64], degrees: std::ops::Range<usize>) -> Vec<f64> {
    let mut out = vec![0.0; basis.len()];
    for k in degrees {
        let c = coefficients[k];
        for (o, q) in out.iter_mut().zip(basis.column_unchecked(k)) {
            *o = c.mul_add(*q, *o);
        }
    }
    out
}

/// `b_k = f . Q^_k` for every column of the basis.
pub fn project(basis: &OrthoBasis, series: &DataSeries) -> Result<Vec<f64>> {
    check_lattice(basis, series)?;
    let (mean, scale) = conditioning(series.values());
    let scaled: Vec<f64> = series.values().iter().map(|v| (v - mean) / scale).collect();
    let mut b: Vec<f64> = project_scaled(basis, &scaled).into_iter().map(|c| c * scale).collect();
    // Column 0 is the normalized constant 1/sqrt(N+1).
    b[0] += mean * (series.len() as f64).sqrt();
    Ok(b)
}

/// Degree-`cutoff` trend and residue.
pub fn detrend(basis: &OrthoBasis, series: &DataSeries, cutoff: usize) -> Result<FitResult> {
    check_lattice(basis, series)?;
    if cutoff > basis.max_degree() {
        return Err(Error::DegreeOutOfRange {
            degree: cutoff,
            max: basis.max_degree(),
        });
    }
    let (mean, scale) = conditioning(series.values());
    let scaled: Vec<f64> = series.values().iter().map(|v| (v - mean) / scale).collect();
    let mut b_scaled = project_scaled(basis, &scaled);
    let trend = synthesize(basis, &b_scaled, 0..cutoff + 1);
    let first: Vec<f64> = scaled.iter().zip(&trend).map(|(f, p)| f - p).collect();
    // Project once more: rounding leaves a trend that dominates near the ends.
    let correction: Vec<f64> = (0..=cutoff)
        .map(|k| dot_compensated(&first, basis.column_unchecked(k)))
        .collect();
    let again = synthesize(basis, &correction, 0..cutoff + 1);
    b_scaled.iter_mut().zip(&correction).for_each(|(b, c)| *b += c);
    let residue: Vec<f64> = first
        .iter()
        .zip(&again)
        .map(|(f, p)| (f - p) * scale)
        .collect();
    let fitted: Vec<f64> = series
        .values()
        .iter()
        .zip(&residue)
        .map(|(v, r)| v - r)
        .collect();
    let mut coefficients: Vec<f64> = b_scaled.into_iter().map(|c| c * scale).collect();
    coefficients[0] += mean * (series.len() as f64).sqrt();
    Ok(FitResult {
        coefficients,
        cutoff,
        fitted,
        residue,
    })
}

/// Residue synthesized from the high-degree tail `sum_{k > cutoff} b_k Q^_k`.
/// `cutoff = None` sums the whole expansion. Needs a full basis (`M = N`).
pub fn residue_tail(
    basis: &OrthoBasis,
    coefficients: &[f64],
    cutoff: Option<usize>,
) -> Result<Vec<f64>> {
    if basis.max_degree() != basis.upper() {
        return Err(Error::params(format!(
            "residue tail needs a full basis (M = N = {}), got M = {}",
            basis.upper(),
            basis.max_degree()
        )));
    }
    if coefficients.len() != basis.max_degree() + 1 {
        return Err(Error::params(format!(
            "expected {} coefficients, got {}",
            basis.max_degree() + 1,
            coefficients.len()
        )));
    }
    let start = match cutoff {
        None => 0,
        Some(c) if c <= basis.max_degree() => c + 1,
        Some(c) => {
            return Err(Error::DegreeOutOfRange {
                degree: c,
                max: basis.max_degree(),
            })
        }
    };
    Ok(synthesize(basis, coefficients, start..basis.max_degree() + 1))
}

#[derive(Serialize)]
struct CsvRow {
    t: f64,
    value: f64,
    fitted: f64,
    residue: f64,
}

/// CSV with columns `t,value,fitted,residue`.
pub fn write_fit_csv<W: Write>(series: &DataSeries, fit: &FitResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (j, &t) in series.lattice().points().iter().enumerate() {
        w.serialize(CsvRow {
            t,
            value: series.values()[j],
            fitted: fit.fitted[j],
            residue: fit.residue[j],
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    t: f64,
    value: f64,
}

/// Read a series from CSV with `t` and `value` columns; other columns are ignored.
pub fn read_series_csv<R: Read>(input: R, unit: &str) -> Result<DataSeries> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut t = Vec::new();
    let mut v = Vec::new();
    for row in r.deserialize() {
        let row: SeriesRow = row?;
        t.push(row.t);
        v.push(row.value);
    }
    DataSeries::new(Lattice::new(t)?, v, unit)
}

/// CSV with columns `t,value`.
pub fn write_series_csv<W: Write>(series: &DataSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (&t, &value) in series.lattice().points().iter().zip(series.values()) {
        w.serialize(SeriesRow { t, value })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSidecar {
    pub unit: String,
    pub points: usize,
    pub max_degree: usize,
    pub cutoff: usize,
    pub orth_tol: f64,
    pub achieved_orth_err: f64,
    pub lattice_kind: crate::lattice::LatticeKind,
    pub coefficients: Vec<f64>,
}

impl FitSidecar {
    pub fn new(basis: &OrthoBasis, series: &DataSeries, fit: &FitResult) -> Self {
        FitSidecar {
            unit: series.unit().to_owned(),
            points: series.len(),
            max_degree: basis.max_degree(),
            cutoff: fit.cutoff,
            orth_tol: basis.orth_tol(),
            achieved_orth_err: basis.achieved_orth_err(),
            lattice_kind: series.lattice().kind(),
            coefficients: fit.coefficients.clone(),
        }
    }
}

pub fn write_fit_sidecar<W: Write>(sidecar: &FitSidecar, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, sidecar)?;
    Ok(())
}
