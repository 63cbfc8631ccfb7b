use std::collections::BTreeMap;
use std::io::Write;

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{analyze_residue, calibrate_templates, series_spread, DetectorConfig, LocalEvent, LocalKind, Projector};
use crate::basis::BasisCache;
use crate::error::{Error, Result};
use crate::fit::{detrend, DataSeries};
use crate::lattice::Lattice;
use crate::par::{map_collect, Execution};
use crate::sp3::{assemble_window, Coordinate, RecordStore, SatId, SatelliteSeries, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    DayBoundaryJump,
    AnomalousJump,
    Outlier,
    ManeuverLike,
    Unclassified,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DayBoundaryJump => "day-boundary-jump",
            EventKind::AnomalousJump => "anomalous-jump",
            EventKind::Outlier => "outlier",
            EventKind::ManeuverLike => "maneuver-like",
            EventKind::Unclassified => "unclassified",
        }
    }
}

/// One window's opinion about an epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub satellite: SatId,
    pub coordinate: Coordinate,
    pub epoch: NaiveDateTime,
    pub kind: EventKind,
    pub signed_km: f64,
    pub confidence: f64,
    pub spike_estimate_km: Option<f64>,
    pub window_start: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub satellite: SatId,
    pub coordinate: Coordinate,
    pub epoch: NaiveDateTime,
    pub kind: EventKind,
    pub magnitude_km: f64,
    pub signed_km: f64,
    pub confidence: f64,
    pub spike_estimate_km: Option<f64>,
    /// Start epochs of the windows that reported this epoch.
    pub windows: Vec<NaiveDateTime>,
    /// Difference from an overridden duplicate value at this epoch.
    pub shadow_offset_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub satellite: SatId,
    pub coordinate: Coordinate,
    pub start: NaiveDateTime,
    pub start_index: usize,
    pub points: usize,
    pub sigma_km: Option<f64>,
    pub events: usize,
    pub hidden: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub events: Vec<AnomalyEvent>,
    pub windows: Vec<WindowReport>,
}

impl Analysis {
    pub fn failed_windows(&self) -> usize {
        self.windows.iter().filter(|w| w.error.is_some()).count()
    }
}

/// Window start indices covering `len` points; the last window is aligned
/// to the end of the series.
pub fn window_starts(len: usize, window: usize, step: usize) -> Vec<usize> {
    if len < window || step == 0 {
        return Vec::new();
    }
    let mut starts: Vec<usize> = (0..=len - window).step_by(step).collect();
    if starts.last() != Some(&(len - window)) {
        starts.push(len - window);
    }
    starts
}

fn classify_kind(e: &LocalEvent, epoch: NaiveDateTime, config: &DetectorConfig) -> EventKind {
    match e.kind {
        LocalKind::Jump => {
            let midnight = epoch.num_seconds_from_midnight() == 0 && epoch.nanosecond() == 0;
            if midnight && e.magnitude() < config.anomalous_jump_floor_km {
                EventKind::DayBoundaryJump
            } else {
                EventKind::AnomalousJump
            }
        }
        LocalKind::Outlier => EventKind::Outlier,
        LocalKind::Unmatched if e.magnitude() >= config.maneuver_floor_km => EventKind::ManeuverLike,
        LocalKind::Unmatched => EventKind::Unclassified,
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Combine window votes into one event per satellite, coordinate and epoch.
///
/// The kind with the largest summed confidence wins; the magnitude is the
/// median over the winning votes. The result does not depend on vote order.
pub fn merge_votes(votes: &[Vote]) -> Vec<AnomalyEvent> {
    let mut groups: BTreeMap<(SatId, Coordinate, NaiveDateTime), Vec<&Vote>> = BTreeMap::new();
    for v in votes {
        groups.entry((v.satellite, v.coordinate, v.epoch)).or_default().push(v);
    }
    groups
        .into_iter()
        .map(|((satellite, coordinate, epoch), group)| {
            let mut mass: BTreeMap<EventKind, f64> = BTreeMap::new();
            for v in &group {
                *mass.entry(v.kind).or_default() += v.confidence;
            }
            let (&kind, &winner_mass) = mass
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
                .unwrap();
            let winners: Vec<&&Vote> = group.iter().filter(|v| v.kind == kind).collect();
            let signed_km = median(winners.iter().map(|v| v.signed_km).collect()).unwrap();
            let spike_estimate_km = median(winners.iter().filter_map(|v| v.spike_estimate_km).collect());
            let mut windows: Vec<NaiveDateTime> = group.iter().map(|v| v.window_start).collect();
            windows.sort();
            windows.dedup();
            AnomalyEvent {
                satellite,
                coordinate,
                epoch,
                kind,
                magnitude_km: signed_km.abs(),
                signed_km,
                confidence: winner_mass / group.len() as f64,
                spike_estimate_km,
                windows,
                shadow_offset_km: None,
            }
        })
        .collect()
}

struct WindowOutcome {
    report: WindowReport,
    votes: Vec<Vote>,
}

fn analyze_window(
    series: &SatelliteSeries,
    start: usize,
    cache: &BasisCache,
    config: &DetectorConfig,
) -> Result<(Vec<Vote>, f64, usize, usize)> {
    let w = config.window_points;
    let lo = series.grid_index.partition_point(|&g| g < start);
    let hi = series.grid_index.partition_point(|&g| g < start + w);
    let present = hi - lo;
    let missing = w - present;
    if missing as f64 > config.max_gap_fraction * w as f64 || present <= config.degree {
        return Err(Error::InsufficientCoverage { missing, expected: w });
    }
    let abscissas = series.grid_index[lo..hi]
        .iter()
        .map(|&g| (g - start) as f64 * series.interval_s)
        .collect();
    let data = DataSeries::new(Lattice::new(abscissas)?, series.values[lo..hi].to_vec(), "km")?;
    let basis = cache.get_or_build(data.lattice(), config.degree, config.orth_tol)?;
    let fit = detrend(&basis, &data, config.degree)?;
    let projector = Projector::new(&basis, config.degree)?;
    let calibration = if missing == 0 {
        calibrate_templates(w, config.degree).ok()
    } else {
        None
    };
    let floor = config.sigma_floor_rel * series_spread(data.values());
    let scan = analyze_residue(&projector, &fit.residue, floor, calibration.as_deref(), config)?;
    let window_start = series.start + chrono::TimeDelta::milliseconds((start as f64 * series.interval_s * 1e3).round() as i64);
    let votes = scan
        .events
        .iter()
        .map(|e| {
            let epoch = series.epochs[lo + e.index];
            Vote {
                satellite: series.satellite,
                coordinate: series.coordinate,
                epoch,
                kind: classify_kind(e, epoch, config),
                signed_km: e.amplitude,
                confidence: e.confidence,
                spike_estimate_km: e.spike_estimate.is_finite().then_some(e.spike_estimate),
                window_start,
            }
        })
        .collect();
    Ok((votes, scan.sigma, present, scan.hidden))
}

/// Slide windows along one series, detect anomalies in each and merge the
/// per-window findings. Windows that cannot be analysed are reported and
/// skipped.
pub fn sliding_analysis(
    series: &SatelliteSeries,
    cache: &BasisCache,
    config: &DetectorConfig,
    exec: Execution,
) -> Result<Analysis> {
    config.validate()?;
    let nominal = series.values.len() + series.gaps.len();
    if nominal < config.window_points {
        return Err(Error::InvalidSeries(format!(
            "{} {} spans {nominal} epochs, fewer than one window of {}",
            series.satellite, series.coordinate, config.window_points
        )));
    }
    let starts = window_starts(nominal, config.window_points, config.step_points);
    let outcomes: Vec<WindowOutcome> = map_collect(exec, &starts, |&start| {
        let window_start = series.start
            + chrono::TimeDelta::milliseconds((start as f64 * series.interval_s * 1e3).round() as i64);
        let mut report = WindowReport {
            satellite: series.satellite,
            coordinate: series.coordinate,
            start: window_start,
            start_index: start,
            points: 0,
            sigma_km: None,
            events: 0,
            hidden: 0,
            error: None,
        };
        match analyze_window(series, start, cache, config) {
            Ok((votes, sigma, points, hidden)) => {
                report.points = points;
                report.sigma_km = Some(sigma);
                report.events = votes.len();
                report.hidden = hidden;
                WindowOutcome { report, votes }
            }
            Err(e) => {
                log::warn!("{} {} window at {window_start}: {e}", series.satellite, series.coordinate);
                report.error = Some(e.to_string());
                WindowOutcome { report, votes: Vec::new() }
            }
        }
    });
    let votes: Vec<Vote> = outcomes.iter().flat_map(|o| o.votes.iter().cloned()).collect();
    let mut events = merge_votes(&votes);
    for e in &mut events {
        e.shadow_offset_km = series.shadows.iter().find(|s| s.epoch == e.epoch).and_then(|s| {
            let i = series.epochs.binary_search(&e.epoch).ok()?;
            Some(series.values[i] - s.value)
        });
    }
    Ok(Analysis {
        events,
        windows: outcomes.into_iter().map(|o| o.report).collect(),
    })
}

/// Analyse every requested satellite and coordinate over the full span held
/// by the store.
pub fn analyze_store(
    store: &RecordStore,
    satellites: &[SatId],
    coordinates: &[Coordinate],
    interval_s: f64,
    cache: &BasisCache,
    config: &DetectorConfig,
    exec: Execution,
) -> Result<Analysis> {
    config.validate()?;
    let ranges: Vec<_> = satellites.iter().filter_map(|&s| store.epoch_range(s)).collect();
    let (Some(first), Some(last)) = (ranges.iter().map(|r| r.0).min(), ranges.iter().map(|r| r.1).max()) else {
        return Ok(Analysis::default());
    };
    let start = first.date().and_hms_opt(0, 0, 0).unwrap();
    let span = (last - start).num_milliseconds() as f64 / 1e3 + interval_s;
    let days = (span / SECONDS_PER_DAY).ceil().max(1.0) as usize;

    let mut out = Analysis::default();
    for &sat in satellites {
        for &coord in coordinates {
            let series = match assemble_window(store, sat, coord, start, days, interval_s, 1.0) {
                Ok(w) => w.series,
                Err(e) => {
                    log::warn!("{sat} {coord}: {e}");
                    continue;
                }
            };
            match sliding_analysis(&series, cache, config, exec) {
                Ok(a) => {
                    out.events.extend(a.events);
                    out.windows.extend(a.windows);
                }
                Err(e) => log::warn!("{sat} {coord}: {e}"),
            }
        }
    }
    Ok(out)
}

pub fn write_events_jsonl<W: Write>(events: &[AnomalyEvent], mut out: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(events: &[AnomalyEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "satellite",
        "coordinate",
        "epoch",
        "kind",
        "magnitude_km",
        "signed_km",
        "confidence",
        "spike_estimate_km",
        "shadow_offset_km",
        "windows",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
    for e in events {
        let windows: Vec<String> = e.windows.iter().map(|t| t.format("%Y-%m-%dT%H:%M:%S").to_string()).collect();
        w.write_record([
            e.satellite.to_string(),
            e.coordinate.to_string(),
            e.epoch.format("%Y-%m-%dT%H:%M:%S").to_string(),
            e.kind.as_str().to_string(),
            format!("{:e}", e.magnitude_km),
            format!("{:e}", e.signed_km),
            format!("{:.4}", e.confidence),
            opt(e.spike_estimate_km),
            opt(e.shadow_offset_km),
            windows.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
