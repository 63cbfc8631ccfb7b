use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use super::{SatId, Sp3File, Sp3Record};
use crate::error::{Error, Result};
use crate::fit::DataSeries;
use crate::lattice::Lattice;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Largest fraction of missing epochs a window may have.
pub const DEFAULT_MAX_GAP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Coordinate {
    X,
    Y,
    Z,
}

impl Coordinate {
    pub const ALL: [Coordinate; 3] = [Coordinate::X, Coordinate::Y, Coordinate::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coordinate::X => "X",
            Coordinate::Y => "Y",
            Coordinate::Z => "Z",
        })
    }
}

impl FromStr for Coordinate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Coordinate::X),
            "Y" | "y" => Ok(Coordinate::Y),
            "Z" | "z" => Ok(Coordinate::Z),
            _ => Err(Error::params(format!("unknown coordinate {s:?}"))),
        }
    }
}

/// Where a value came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub file: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
struct Candidate {
    record: Sp3Record,
    file_start: NaiveDateTime,
    file: String,
}

impl Candidate {
    fn rank(&self) -> (NaiveDateTime, &str, usize) {
        (self.file_start, &self.file, self.record.line)
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            file: self.file.clone(),
            line: self.record.line,
        }
    }
}

/// Position records from any number of files, indexed by satellite and epoch.
///
/// When several files carry the same epoch (the midnight epoch of adjacent
/// daily files), the file with the later start epoch wins and the others are
/// kept as shadows. Ties fall back to file label, so the result does not
/// depend on the order files are added.
#[derive(Debug, Clone, Default)]
pub struct RecordStore {
    entries: BTreeMap<(SatId, NaiveDateTime), Vec<Candidate>>,
}

impl RecordStore {
    pub fn new() -> Self {
        RecordStore::default()
    }

    /// Add every record of `file`; `label` identifies it in provenance.
    pub fn add_file(&mut self, file: &Sp3File, label: impl Into<String>) {
        let label = label.into();
        for r in &file.records {
            let slot = self.entries.entry((r.satellite, r.epoch)).or_default();
            let c = Candidate {
                record: r.clone(),
                file_start: file.header.start,
                file: label.clone(),
            };
            let pos = slot.partition_point(|e| e.rank() <= c.rank());
            slot.insert(pos, c);
        }
    }

    /// Build a store labelling each file by its source path, or by its index
    /// when it has none.
    pub fn from_files(files: &[Sp3File]) -> Self {
        let mut s = RecordStore::new();
        for (i, f) in files.iter().enumerate() {
            let label = f
                .source
                .as_ref()
                .map_or_else(|| format!("#{i}"), |p| p.display().to_string());
            s.add_file(f, label);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn satellites(&self) -> Vec<SatId> {
        let mut v: Vec<SatId> = self.entries.keys().map(|(s, _)| *s).collect();
        v.dedup();
        v
    }

    /// First and last epoch held for `sat`.
    pub fn epoch_range(&self, sat: SatId) -> Option<(NaiveDateTime, NaiveDateTime)> {
        let mut it = self
            .entries
            .range((sat, NaiveDateTime::MIN)..=(sat, NaiveDateTime::MAX))
            .map(|((_, t), _)| *t);
        let first = it.next()?;
        Some((first, it.last().unwrap_or(first)))
    }

    pub fn get(&self, sat: SatId, epoch: NaiveDateTime) -> Option<(&Sp3Record, Provenance)> {
        let c = self.entries.get(&(sat, epoch))?.last()?;
        Some((&c.record, c.provenance()))
    }

    /// Records overridden by a later file at this epoch, oldest first.
    pub fn shadowed(&self, sat: SatId, epoch: NaiveDateTime) -> Vec<(&Sp3Record, Provenance)> {
        match self.entries.get(&(sat, epoch)) {
            Some(v) => v[..v.len() - 1].iter().map(|c| (&c.record, c.provenance())).collect(),
            None => Vec::new(),
        }
    }
}

/// A value overridden at a duplicated epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shadow {
    /// Index on the nominal epoch grid of the window.
    pub index: usize,
    pub epoch: NaiveDateTime,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteSeries {
    pub satellite: SatId,
    pub coordinate: Coordinate,
    pub start: NaiveDateTime,
    pub interval_s: f64,
    /// Epochs actually present, sorted.
    pub epochs: Vec<NaiveDateTime>,
    /// Kilometers, one per entry of `epochs`.
    pub values: Vec<f64>,
    /// Indices on the nominal grid with no usable value.
    pub gaps: Vec<usize>,
    /// Index on the nominal grid of each present value.
    pub grid_index: Vec<usize>,
    pub provenance: Vec<Provenance>,
    pub shadows: Vec<Shadow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub series: SatelliteSeries,
    /// Seconds since the window start.
    pub lattice: Lattice,
}

impl Window {
    pub fn data_series(&self) -> Result<DataSeries> {
        DataSeries::new(self.lattice.clone(), self.series.values.clone(), "km")
    }

    /// Number of points on the nominal grid.
    pub fn nominal_len(&self) -> usize {
        self.series.values.len() + self.series.gaps.len()
    }
}

/// Cut a window of `n_days` days starting at `start` for one coordinate of
/// one satellite. Missing epochs and records with bad positions are left out
/// of the lattice, which then becomes non-uniform.
pub fn assemble_window(
    store: &RecordStore,
    satellite: SatId,
    coordinate: Coordinate,
    start: NaiveDateTime,
    n_days: usize,
    interval_s: f64,
    max_gap_fraction: f64,
) -> Result<Window> {
    if n_days == 0 {
        return Err(Error::params("window must span at least one day"));
    }
    if !(interval_s > 0.0) {
        return Err(Error::params("epoch interval must be positive"));
    }
    let per_day = SECONDS_PER_DAY / interval_s;
    if (per_day - per_day.round()).abs() > 1e-9 {
        return Err(Error::params(format!(
            "interval {interval_s} s does not divide a day"
        )));
    }
    let expected = n_days * per_day.round() as usize;
    let step = TimeDelta::milliseconds((interval_s * 1e3).round() as i64);

    let mut series = SatelliteSeries {
        satellite,
        coordinate,
        start,
        interval_s,
        epochs: Vec::with_capacity(expected),
        values: Vec::with_capacity(expected),
        gaps: Vec::new(),
        grid_index: Vec::with_capacity(expected),
        provenance: Vec::with_capacity(expected),
        shadows: Vec::new(),
    };
    let mut abscissas = Vec::with_capacity(expected);
    for i in 0..expected {
        let epoch = start + step * i as i32;
        for (r, p) in store.shadowed(satellite, epoch) {
            if !r.flags.bad_position {
                series.shadows.push(Shadow {
                    index: i,
                    epoch,
                    value: r.position[coordinate.index()],
                    provenance: p,
                });
            }
        }
        match store.get(satellite, epoch) {
            Some((r, p)) if !r.flags.bad_position => {
                series.epochs.push(epoch);
                series.values.push(r.position[coordinate.index()]);
                series.grid_index.push(i);
                series.provenance.push(p);
                abscissas.push(i as f64 * interval_s);
            }
            _ => series.gaps.push(i),
        }
    }
    let missing = series.gaps.len();
    if missing as f64 > max_gap_fraction * expected as f64 || abscissas.len() < 2 {
        return Err(Error::InsufficientCoverage { missing, expected });
    }
    let lattice = Lattice::new(abscissas)?;
    Ok(Window { series, lattice })
}
