//! Synthetic datasets: unit jump / impulse series and orbit-like SP3 corpora
//! with injected anomalies and a ground-truth sidecar.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sp3::{format_epoch_line, format_position_line, Coordinate, RecordFlags, SatId, Sp3Record, SECONDS_PER_DAY};

/// `magnitude` for `j >= at`, zero before.
pub fn step_series(points: usize, at: usize, magnitude: f64) -> Vec<f64> {
    (0..points).map(|j| if j >= at { magnitude } else { 0.0 }).collect()
}

/// `magnitude` at `at`, zero elsewhere.
pub fn impulse_series(points: usize, at: usize, magnitude: f64) -> Vec<f64> {
    (0..points).map(|j| if j == at { magnitude } else { 0.0 }).collect()
}

pub const EARTH_ROTATION_RATE: f64 = 7.292_115e-5;

/// Circular orbit seen from the rotating Earth frame, with a weak second
/// harmonic standing in for perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub radius_km: f64,
    pub inclination_deg: f64,
    pub period_s: f64,
    /// Right ascension of the ascending node at `t = 0`, radians.
    pub node: f64,
    /// Argument of latitude at `t = 0`, radians.
    pub phase: f64,
    /// Relative amplitude of the radial second harmonic.
    pub wobble: f64,
}

impl Default for OrbitParams {
    fn default() -> Self {
        OrbitParams {
            radius_km: 26_560.0,
            inclination_deg: 55.0,
            period_s: 43_082.0,
            node: 0.7,
            phase: 0.3,
            wobble: 2e-4,
        }
    }
}

impl OrbitParams {
    /// Earth-fixed position in kilometers `t` seconds after the reference epoch.
    pub fn position(&self, t: f64) -> [f64; 3] {
        let u = self.phase + TAU * t / self.period_s;
        let r = self.radius_km * (1.0 + self.wobble * (2.0 * u).cos());
        let inc = self.inclination_deg.to_radians();
        let (su, cu) = u.sin_cos();
        let (si, ci) = inc.sin_cos();
        let node = self.node - EARTH_ROTATION_RATE * t;
        let (sn, cn) = node.sin_cos();
        [
            r * (cn * cu - sn * su * ci),
            r * (sn * cu + cn * su * ci),
            r * su * si,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    /// Persistent offset from `epoch` onward.
    Jump,
    /// Offset at `epoch` only.
    Outlier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub kind: InjectionKind,
    pub satellite: SatId,
    pub coordinate: Coordinate,
    pub epoch: NaiveDateTime,
    pub magnitude_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub start: NaiveDate,
    pub days: usize,
    pub interval_s: f64,
    pub satellites: Vec<SatId>,
    /// Round positions to whole millimeters, as published orbits are.
    pub round_mm: bool,
    /// Uniform noise half-width in kilometers added before rounding.
    pub noise_km: f64,
    pub seed: u64,
    pub injections: Vec<Injection>,
}

impl CorpusSpec {
    pub fn new(start: NaiveDate, days: usize, satellites: Vec<SatId>) -> Self {
        CorpusSpec {
            start,
            days,
            interval_s: 900.0,
            satellites,
            round_mm: true,
            noise_km: 0.0,
            seed: 0,
            injections: Vec::new(),
        }
    }

    fn validate(&self) -> Result<usize> {
        if self.days == 0 || self.satellites.is_empty() {
            return Err(Error::params("corpus needs at least one day and one satellite"));
        }
        let per_day = SECONDS_PER_DAY / self.interval_s;
        if !(self.interval_s > 0.0) || (per_day - per_day.round()).abs() > 1e-9 {
            return Err(Error::params("interval must divide a day"));
        }
        if !(self.noise_km >= 0.0) || !self.noise_km.is_finite() {
            return Err(Error::params("noise must be finite and non-negative"));
        }
        Ok(per_day.round() as usize)
    }

    pub fn start_epoch(&self) -> NaiveDateTime {
        self.start.and_hms_opt(0, 0, 0).expect("midnight exists")
    }
}

/// Orbit parameters for each satellite, spread deterministically by `seed`.
pub fn orbit_for(sat: SatId, seed: u64) -> OrbitParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(sat.prn()) << 8) ^ sat.system() as u64);
    OrbitParams {
        node: rng.gen_range(0.0..TAU),
        phase: rng.gen_range(0.0..TAU),
        ..OrbitParams::default()
    }
}

/// Records of the whole corpus, one daily block of epochs after another.
pub fn generate_records(spec: &CorpusSpec) -> Result<Vec<Vec<Sp3Record>>> {
    let per_day = spec.validate()?;
    let start = spec.start_epoch();
    let step = TimeDelta::milliseconds((spec.interval_s * 1e3).round() as i64);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let orbits: Vec<OrbitParams> = spec.satellites.iter().map(|&s| orbit_for(s, spec.seed)).collect();
    let mut days = Vec::with_capacity(spec.days);
    for d in 0..spec.days {
        let mut block = Vec::with_capacity(per_day * spec.satellites.len());
        for i in 0..per_day {
            let index = d * per_day + i;
            let t = index as f64 * spec.interval_s;
            let epoch = start + step * index as i32;
            for (sat, orbit) in spec.satellites.iter().zip(&orbits) {
                let mut p = orbit.position(t);
                for inj in spec.injections.iter().filter(|inj| inj.satellite == *sat) {
                    let hit = match inj.kind {
                        InjectionKind::Jump => epoch >= inj.epoch,
                        InjectionKind::Outlier => epoch == inj.epoch,
                    };
                    if hit {
                        p[inj.coordinate.index()] += inj.magnitude_km;
                    }
                }
                for v in &mut p {
                    if spec.noise_km > 0.0 {
                        *v += noise_rng.gen_range(-spec.noise_km..=spec.noise_km);
                    }
                    if spec.round_mm {
                        *v = (*v * 1e6).round() / 1e6;
                    }
                }
                block.push(Sp3Record {
                    epoch,
                    satellite: *sat,
                    position: p,
                    clock: Some(0.0),
                    flags: RecordFlags::default(),
                    line: 0,
                });
            }
        }
        days.push(block);
    }
    Ok(days)
}

const GPS_EPOCH: (i32, u32, u32) = (1980, 1, 6);
const MJD_EPOCH: (i32, u32, u32) = (1858, 11, 17);

fn days_since(t: NaiveDateTime, (y, m, d): (i32, u32, u32)) -> f64 {
    let base = NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap();
    (t - base).num_milliseconds() as f64 / 86_400_000.0
}

/// One SP3-c file holding `records` (sorted by epoch, then satellite).
pub fn write_sp3(
    records: &[Sp3Record],
    satellites: &[SatId],
    interval_s: f64,
    comment: &str,
) -> Result<String> {
    let first = records.first().ok_or_else(|| Error::params("no records to write"))?;
    let start = first.epoch;
    let mut epochs: Vec<NaiveDateTime> = records.iter().map(|r| r.epoch).collect();
    epochs.dedup();
    let mut out = String::new();
    let sec = start.second() as f64 + start.nanosecond() as f64 * 1e-9;
    writeln!(
        out,
        "#cP{:4} {:2} {:2} {:2} {:2} {:11.8} {:7} ORBIT IGS14 FIT  SYN",
        start.year(),
        start.month(),
        start.day(),
        start.hour(),
        start.minute(),
        sec,
        epochs.len()
    )
    .unwrap();
    let gps_days = days_since(start, GPS_EPOCH);
    let week = (gps_days / 7.0).floor();
    let sow = (gps_days - 7.0 * week) * SECONDS_PER_DAY;
    let mjd = days_since(start, MJD_EPOCH);
    writeln!(
        out,
        "## {:4} {:15.8} {:14.8} {:5} {:15.13}",
        week as u32,
        sow,
        interval_s,
        mjd.floor() as u32,
        mjd.fract()
    )
    .unwrap();
    let lines = satellites.len().div_ceil(17).max(5);
    for l in 0..lines {
        let mut line = if l == 0 {
            format!("+  {:3}   ", satellites.len())
        } else {
            "+        ".to_owned()
        };
        for k in 0..17 {
            match satellites.get(l * 17 + k) {
                Some(s) => line.push_str(&s.to_string()),
                None => line.push_str("  0"),
            }
        }
        writeln!(out, "{line}").unwrap();
    }
    for _ in 0..lines {
        writeln!(out, "++       {}", "  0".repeat(17)).unwrap();
    }
    out.push_str("%c G  cc GPS ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc\n");
    out.push_str("%c cc cc ccc ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc\n");
    out.push_str("%f  1.2500000  1.025000000  0.00000000000  0.000000000000000\n");
    out.push_str("%f  0.0000000  0.000000000  0.00000000000  0.000000000000000\n");
    out.push_str("%i    0    0    0    0      0      0      0      0         0\n");
    out.push_str("%i    0    0    0    0      0      0      0      0         0\n");
    for c in comment.lines().take(4) {
        writeln!(out, "/* {c}").unwrap();
    }
    let mut last = None;
    for r in records {
        if last != Some(r.epoch) {
            writeln!(out, "{}", format_epoch_line(r.epoch)).unwrap();
            last = Some(r.epoch);
        }
        writeln!(out, "{}", format_position_line(r)).unwrap();
    }
    out.push_str("EOF\n");
    Ok(out)
}

/// File name used for the daily file starting at `day`: `syn<GPS week><weekday>.sp3`.
pub fn daily_file_name(day: NaiveDate) -> String {
    let t = day.and_hms_opt(0, 0, 0).unwrap();
    let gps_days = days_since(t, GPS_EPOCH).round() as i64;
    format!("syn{:04}{}.sp3", gps_days / 7, gps_days % 7)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: CorpusSpec,
    pub files: Vec<String>,
}

/// Write one SP3 file per day plus `truth.json` into `dir`.
pub fn write_corpus(spec: &CorpusSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    let days = generate_records(spec)?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(days.len());
    for (d, block) in days.iter().enumerate() {
        let day = spec.start + TimeDelta::days(d as i64);
        let text = write_sp3(block, &spec.satellites, spec.interval_s, "synthetic orbit corpus")?;
        let path = dir.join(daily_file_name(day));
        std::fs::write(&path, text)?;
        paths.push(path);
    }
    let truth = GroundTruth {
        spec: spec.clone(),
        files: paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth)?)?;
    Ok(paths)
}
