//! SP3-c / SP3-d precise orbit files.
//!
//! Only the header fields needed to interpret position records are kept.
//! Velocity and correlation records are skipped. Malformed body lines are
//! collected as [`LineIssue`]s instead of aborting the parse.

mod store;

pub use store::{
    assemble_window, Coordinate, Provenance, RecordStore, SatelliteSeries, Shadow, Window,
    DEFAULT_MAX_GAP_FRACTION, SECONDS_PER_DAY,
};

use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_collect, Execution};

/// Value SP3 uses for a missing clock correction (microseconds).
pub const BAD_CLOCK: f64 = 999_999.999_999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sp3Version {
    C,
    D,
}

impl Sp3Version {
    pub fn as_char(self) -> char {
        match self {
            Sp3Version::C => 'c',
            Sp3Version::D => 'd',
        }
    }
}

/// Satellite identifier: constellation letter plus two-digit PRN, e.g. `G08`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SatId {
    system: char,
    prn: u8,
}

impl SatId {
    pub fn new(system: char, prn: u8) -> Result<Self> {
        if !system.is_ascii_uppercase() || prn > 99 {
            return Err(Error::params(format!("invalid satellite id {system}{prn:02}")));
        }
        Ok(SatId { system, prn })
    }

    pub fn system(self) -> char {
        self.system
    }

    pub fn prn(self) -> u8 {
        self.prn
    }
}

impl FromStr for SatId {
    type Err = Error;

    /// Accepts `G08`, and the legacy forms ` 8` / `  8` / `G 8` where a blank
    /// system letter means GPS.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::params(format!("invalid satellite id {s:?}"));
        if s.len() != 3 || !s.is_ascii() {
            return Err(bad());
        }
        let b = s.as_bytes();
        let system = if b[0] == b' ' { 'G' } else { b[0] as char };
        let digits: String = s[1..].chars().map(|c| if c == ' ' { '0' } else { c }).collect();
        let prn: u8 = digits.parse().map_err(|_| bad())?;
        SatId::new(system, prn).map_err(|_| bad())
    }
}

impl TryFrom<String> for SatId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SatId> for String {
    fn from(id: SatId) -> String {
        id.to_string()
    }
}

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.system, self.prn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sp3Header {
    pub version: Sp3Version,
    /// `P` for position-only files, `V` when velocity records follow.
    pub data_type: char,
    pub start: NaiveDateTime,
    pub epoch_count: usize,
    pub data_used: String,
    pub coord_system: String,
    pub orbit_type: String,
    pub agency: String,
    pub gps_week: u32,
    pub seconds_of_week: f64,
    pub interval_s: f64,
    pub mjd: u32,
    pub fractional_day: f64,
    pub satellites: Vec<SatId>,
    pub time_system: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFlags {
    /// At least one coordinate is the `0.000000` bad-value marker.
    pub bad_position: bool,
    /// Clock is missing or the `999999.999999` marker.
    pub bad_clock: bool,
    pub clock_event: bool,
    pub clock_predicted: bool,
    pub maneuver: bool,
    pub orbit_predicted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sp3Record {
    pub epoch: NaiveDateTime,
    pub satellite: SatId,
    /// ECEF X, Y, Z in kilometers.
    pub position: [f64; 3],
    /// Microseconds; `None` when absent or flagged bad.
    pub clock: Option<f64>,
    pub flags: RecordFlags,
    /// 1-based line number in the source text.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineIssue {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sp3File {
    pub header: Sp3Header,
    pub epochs: Vec<NaiveDateTime>,
    pub records: Vec<Sp3Record>,
    pub issues: Vec<LineIssue>,
    pub source: Option<PathBuf>,
}

fn field(line: &str, start: usize, end: usize) -> &str {
    let end = end.min(line.len());
    if start >= end {
        return "";
    }
    line.get(start..end).unwrap_or("").trim()
}

fn header_err(line: usize, what: &str) -> Error {
    Error::MalformedHeader(format!("line {line}: {what}"))
}

fn parse_num<T: FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| header_err(line, &format!("bad {what} {s:?}")))
}

fn make_epoch(y: i32, mo: u32, d: u32, h: u32, mi: u32, sec: f64) -> Option<NaiveDateTime> {
    if !(0.0..61.0).contains(&sec) {
        return None;
    }
    let whole = sec.floor();
    let nanos = ((sec - whole) * 1e9).round() as i64;
    NaiveDate::from_ymd_opt(y, mo, d)?
        .and_hms_opt(h, mi, 0)
        .map(|t| t + TimeDelta::seconds(whole as i64) + TimeDelta::nanoseconds(nanos))
}

/// `* YYYY MM DD HH MM SS.ssssssss`
fn parse_epoch_line(line: &str, number: usize) -> Result<NaiveDateTime> {
    let bad = |reason: &str| Error::MalformedEpochLine {
        line: number,
        reason: reason.to_owned(),
    };
    let parts: Vec<&str> = line[1..].split_whitespace().collect();
    if parts.len() < 6 {
        return Err(bad("expected 6 date/time fields"));
    }
    let int = |i: usize| parts[i].parse::<u32>().map_err(|_| bad(&format!("bad field {:?}", parts[i])));
    let sec: f64 = parts[5].parse().map_err(|_| bad(&format!("bad seconds {:?}", parts[5])))?;
    make_epoch(int(0)? as i32, int(1)?, int(2)?, int(3)?, int(4)?, sec)
        .ok_or_else(|| bad("date out of range"))
}

fn parse_position_line(line: &str, epoch: NaiveDateTime, number: usize) -> std::result::Result<Sp3Record, String> {
    if line.len() < 46 {
        return Err(format!("position line too short ({} columns)", line.len()));
    }
    let id = line.get(1..4).ok_or("bad satellite field")?;
    let satellite: SatId = id.parse().map_err(|e: Error| e.to_string())?;
    let mut position = [0.0f64; 3];
    for (k, p) in position.iter_mut().enumerate() {
        let s = field(line, 4 + 14 * k, 18 + 14 * k);
        *p = s
            .parse()
            .map_err(|_| format!("bad {} coordinate {s:?}", ["X", "Y", "Z"][k]))?;
        if !p.is_finite() {
            return Err(format!("non-finite {} coordinate", ["X", "Y", "Z"][k]));
        }
    }
    let clock_text = field(line, 46, 60);
    let clock = if clock_text.is_empty() {
        None
    } else {
        let c: f64 = clock_text
            .parse()
            .map_err(|_| format!("bad clock {clock_text:?}"))?;
        (c.abs() < BAD_CLOCK).then_some(c)
    };
    let flag = |col: usize| line.as_bytes().get(col).copied();
    let flags = RecordFlags {
        bad_position: position.iter().any(|&v| v == 0.0),
        bad_clock: clock.is_none(),
        clock_event: flag(74) == Some(b'E'),
        clock_predicted: flag(75) == Some(b'P'),
        maneuver: flag(78) == Some(b'M'),
        orbit_predicted: flag(79) == Some(b'P'),
    };
    Ok(Sp3Record {
        epoch,
        satellite,
        position,
        clock,
        flags,
        line: number,
    })
}

struct HeaderState {
    declared_sats: Option<usize>,
    satellites: Vec<SatId>,
    time_system: Option<String>,
}

fn parse_header_line1(line: &str) -> Result<(Sp3Version, char, NaiveDateTime, usize, [String; 4])> {
    let mut chars = line.chars();
    if chars.next() != Some('#') {
        return Err(header_err(1, "first line must start with '#'"));
    }
    let version = match chars.next() {
        Some('c') => Sp3Version::C,
        Some('d') => Sp3Version::D,
        Some(v) if v.is_ascii_alphabetic() => return Err(Error::UnknownVersion(v)),
        _ => return Err(header_err(1, "missing version character")),
    };
    let data_type = chars.next().unwrap_or('P');
    if data_type != 'P' && data_type != 'V' {
        return Err(header_err(1, &format!("unknown data type {data_type:?}")));
    }
    let y: i32 = parse_num(field(line, 3, 7), 1, "year")?;
    let mo: u32 = parse_num(field(line, 8, 10), 1, "month")?;
    let d: u32 = parse_num(field(line, 11, 13), 1, "day")?;
    let h: u32 = parse_num(field(line, 14, 16), 1, "hour")?;
    let mi: u32 = parse_num(field(line, 17, 19), 1, "minute")?;
    let s: f64 = parse_num(field(line, 20, 31), 1, "seconds")?;
    let start = make_epoch(y, mo, d, h, mi, s).ok_or_else(|| header_err(1, "start epoch out of range"))?;
    let count: usize = parse_num(field(line, 32, 39), 1, "epoch count")?;
    let rest = [
        field(line, 40, 45).to_owned(),
        field(line, 46, 51).to_owned(),
        field(line, 52, 55).to_owned(),
        field(line, 56, 60).to_owned(),
    ];
    Ok((version, data_type, start, count, rest))
}

/// Parse a whole SP3 stream.
pub fn parse_sp3<R: BufRead>(input: R) -> Result<Sp3File> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::MalformedHeader("empty input".into()))?;
    let first = first?;
    if first.trim().is_empty() {
        return Err(Error::MalformedHeader("empty first line".into()));
    }
    let (version, data_type, start, epoch_count, [data_used, coord_system, orbit_type, agency]) =
        parse_header_line1(&first)?;

    let (n2, second) = lines
        .next()
        .ok_or_else(|| Error::MalformedHeader("missing second header line".into()))?;
    let second = second?;
    if !second.starts_with("##") {
        return Err(header_err(n2, "second line must start with '##'"));
    }
    let gps_week: u32 = parse_num(field(&second, 3, 7), n2, "GPS week")?;
    let seconds_of_week: f64 = parse_num(field(&second, 8, 23), n2, "seconds of week")?;
    let interval_s: f64 = parse_num(field(&second, 24, 38), n2, "epoch interval")?;
    let mjd: u32 = parse_num(field(&second, 39, 44), n2, "MJD")?;
    let fractional_day: f64 = parse_num(field(&second, 45, 60), n2, "fractional day")?;
    if !(interval_s > 0.0) {
        return Err(header_err(n2, "epoch interval must be positive"));
    }

    let mut hs = HeaderState {
        declared_sats: None,
        satellites: Vec::new(),
        time_system: None,
    };
    let mut epochs = Vec::new();
    let mut records = Vec::new();
    let mut issues = Vec::new();
    let mut current: Option<NaiveDateTime> = None;
    let mut in_body = false;

    for (number, line) in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim() == "EOF" {
            break;
        }
        if line.trim().is_empty() || line.starts_with("/*") {
            continue;
        }
        if !in_body {
            if line.starts_with("++") || line.starts_with("%f") || line.starts_with("%i") {
                continue;
            }
            if line.starts_with('+') {
                if hs.declared_sats.is_none() {
                    hs.declared_sats = Some(parse_num(field(line, 1, 6), number, "satellite count")?);
                }
                let want = hs.declared_sats.unwrap_or(0);
                let mut col = 9;
                while hs.satellites.len() < want && col + 3 <= line.len() {
                    let Some(id) = line.get(col..col + 3) else { break };
                    if id.trim() == "0" || id.trim().is_empty() {
                        break;
                    }
                    hs.satellites.push(
                        id.parse()
                            .map_err(|_| header_err(number, &format!("bad satellite id {id:?}")))?,
                    );
                    col += 3;
                }
                continue;
            }
            if line.starts_with("%c") {
                if hs.time_system.is_none() {
                    hs.time_system = Some(field(line, 9, 12).to_owned());
                }
                continue;
            }
            if line.starts_with('*') {
                in_body = true;
            } else {
                return Err(header_err(number, &format!("unexpected header line {:?}", truncate(line))));
            }
        }
        match line.as_bytes()[0] {
            b'*' => match parse_epoch_line(line, number) {
                Ok(t) => {
                    epochs.push(t);
                    current = Some(t);
                }
                Err(e) => {
                    // Records up to the next valid epoch line cannot be placed.
                    current = None;
                    issues.push(LineIssue {
                        line: number,
                        reason: e.to_string(),
                    });
                }
            },
            b'P' => match current {
                Some(t) => match parse_position_line(line, t, number) {
                    Ok(r) => records.push(r),
                    Err(reason) => issues.push(LineIssue { line: number, reason }),
                },
                None => issues.push(LineIssue {
                    line: number,
                    reason: "position record without a valid epoch".into(),
                }),
            },
            b'V' => {}
            b'E' if line.starts_with("EP") || line.starts_with("EV") => {}
            _ => issues.push(LineIssue {
                line: number,
                reason: format!("unrecognized record {:?}", truncate(line)),
            }),
        }
    }

    if let Some(want) = hs.declared_sats {
        if hs.satellites.len() != want {
            return Err(Error::MalformedHeader(format!(
                "declared {want} satellites, listed {}",
                hs.satellites.len()
            )));
        }
    } else {
        return Err(Error::MalformedHeader("missing satellite list".into()));
    }
    if epochs.len() != epoch_count {
        issues.push(LineIssue {
            line: 1,
            reason: format!("header declares {epoch_count} epochs, found {}", epochs.len()),
        });
    }
    Ok(Sp3File {
        header: Sp3Header {
            version,
            data_type,
            start,
            epoch_count,
            data_used,
            coord_system,
            orbit_type,
            agency,
            gps_week,
            seconds_of_week,
            interval_s,
            mjd,
            fractional_day,
            satellites: hs.satellites,
            time_system: hs.time_system.unwrap_or_default(),
        },
        epochs,
        records,
        issues,
        source: None,
    })
}

fn truncate(line: &str) -> &str {
    let end = line.char_indices().nth(40).map_or(line.len(), |(i, _)| i);
    &line[..end]
}

pub fn parse_sp3_str(text: &str) -> Result<Sp3File> {
    parse_sp3(text.as_bytes())
}

pub fn parse_sp3_file(path: &Path) -> Result<Sp3File> {
    let file = std::fs::File::open(path)?;
    let mut parsed = parse_sp3(std::io::BufReader::new(file))?;
    parsed.source = Some(path.to_path_buf());
    Ok(parsed)
}

/// Parse several files, possibly in parallel. Results keep the input order.
pub fn parse_files(paths: &[PathBuf], exec: Execution) -> Vec<Result<Sp3File>> {
    map_collect(exec, paths, |p| parse_sp3_file(p))
}

/// Regular files in `dir` whose name matches the glob `pattern` (all files
/// when `None`), sorted by name.
pub fn scan_dir(dir: &Path, pattern: Option<&str>) -> Result<Vec<PathBuf>> {
    let pattern = pattern
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| Error::params(format!("bad file pattern: {e}")))?;
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name();
        let keep = match (&pattern, name.to_str()) {
            (Some(p), Some(n)) => p.matches(n),
            (Some(_), None) => false,
            (None, _) => true,
        };
        if keep {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

/// The `P` line for a record, coordinates and clock as `%14.6f`.
pub fn format_position_line(r: &Sp3Record) -> String {
    let clock = r.clock.unwrap_or(BAD_CLOCK);
    format!(
        "P{}{:14.6}{:14.6}{:14.6}{:14.6}",
        r.satellite, r.position[0], r.position[1], r.position[2], clock
    )
}

/// `*  YYYY MM DD HH MM SS.ssssssss`
pub fn format_epoch_line(t: NaiveDateTime) -> String {
    use chrono::{Datelike, Timelike};
    let sec = t.second() as f64 + t.nanosecond() as f64 * 1e-9;
    format!(
        "*  {:4} {:2} {:2} {:2} {:2} {:11.8}",
        t.year(),
        t.month(),
        t.day(),
        t.hour(),
        t.minute(),
        sec
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satellite_ids() {
        assert_eq!("G08".parse::<SatId>().unwrap().to_string(), "G08");
        assert_eq!("  8".parse::<SatId>().unwrap().to_string(), "G08");
        assert_eq!("R 5".parse::<SatId>().unwrap().to_string(), "R05");
        assert!("g08".parse::<SatId>().is_err());
        assert!("G1".parse::<SatId>().is_err());
    }

    #[test]
    fn empty_input_is_malformed_header() {
        assert!(matches!(parse_sp3_str(""), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn old_versions_are_rejected() {
        let e = parse_sp3_str("#aP2010  8  1  0  0  0.00000000      96\n").unwrap_err();
        assert!(matches!(e, Error::UnknownVersion('a')));
    }

    #[test]
    fn epoch_line_round_trip() {
        let line = "*  2010  8  1 23 45  0.00000000";
        let t = parse_epoch_line(line, 1).unwrap();
        assert_eq!(format_epoch_line(t), line);
        assert!(parse_epoch_line("*  2010 13  1 23 45  0.0", 1).is_err());
    }

    #[test]
    fn position_line_fields_and_flags() {
        let t = parse_epoch_line("*  2010  8  1  0  0  0.00000000", 1).unwrap();
        let line = "PG08  -6187.612435 -15471.445591  20843.785367 999999.999999                  M ";
        let r = parse_position_line(line, t, 7).unwrap();
        assert_eq!(r.position, [-6187.612435, -15471.445591, 20843.785367]);
        assert!(r.flags.bad_clock && r.flags.maneuver && !r.flags.bad_position);
        let bad = "PG09      0.000000      0.000000      0.000000     12.000000";
        let r = parse_position_line(bad, t, 8).unwrap();
        assert!(r.flags.bad_position);
        assert_eq!(r.clock, Some(12.0));
        assert!(parse_position_line("PG09  12.0", t, 9).is_err());
    }
}
