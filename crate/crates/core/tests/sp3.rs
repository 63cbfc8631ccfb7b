use std::collections::HashSet;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use hahnfit::sp3::{
    assemble_window, format_position_line, parse_files, parse_sp3_file, parse_sp3_str, scan_dir,
    Coordinate, RecordStore, SatId, Sp3Version, DEFAULT_MAX_GAP_FRACTION,
};
use hahnfit::synth::{generate_records, write_sp3, CorpusSpec};
use hahnfit::{Error, Execution, LatticeKind};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/igs_style_day.sp3")
}

fn sat(s: &str) -> SatId {
    s.parse().unwrap()
}

fn t(y: i32, m: u32, d: u32, h: u32, mi: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, mi, 0).unwrap()
}

#[test]
fn fixture_counts_match_independent_line_count() {
    let text = std::fs::read_to_string(fixture()).unwrap();
    let p_lines = text.lines().filter(|l| l.starts_with('P')).count();
    let star_lines = text.lines().filter(|l| l.starts_with('*')).count();
    let f = parse_sp3_file(&fixture()).unwrap();
    assert!(f.issues.is_empty(), "{:?}", f.issues);
    assert_eq!(f.header.version, Sp3Version::C);
    assert_eq!(f.header.epoch_count, 96);
    assert_eq!(f.epochs.len(), star_lines);
    assert_eq!(f.header.satellites.len(), 4);
    assert_eq!(f.records.len(), p_lines);
    assert_eq!(f.records.len(), 96 * f.header.satellites.len());
    assert_eq!(f.header.interval_s, 900.0);
    assert_eq!(f.header.time_system, "GPS");
    assert_eq!(f.header.start, t(2010, 8, 2, 0, 0));
}

#[test]
fn bad_values_are_flagged_not_dropped() {
    let f = parse_sp3_file(&fixture()).unwrap();
    let bad: Vec<_> = f.records.iter().filter(|r| r.flags.bad_position).collect();
    assert_eq!(bad.len(), 1);
    assert_eq!(bad[0].satellite, sat("G01"));
    assert_eq!(bad[0].epoch, t(2010, 8, 2, 9, 15));
    assert!(bad[0].flags.bad_clock && bad[0].clock.is_none());
    let maneuvers: Vec<_> = f.records.iter().filter(|r| r.flags.maneuver).collect();
    assert_eq!(maneuvers.len(), 1);
    assert_eq!(maneuvers[0].epoch, t(2010, 8, 2, 12, 30));
}

#[test]
fn position_fields_round_trip_byte_exactly() {
    let text = std::fs::read_to_string(fixture()).unwrap();
    let f = parse_sp3_str(&text).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    for r in &f.records {
        let original = lines[r.line - 1];
        assert_eq!(format_position_line(r), original[..60], "line {}", r.line);
    }
}

#[test]
fn sp3d_with_velocities_and_broken_lines() {
    let text = "\
#dV2020  1  1  0  0  0.00000000       3 ORBIT IGS14 FIT  IGS
## 2086 259200.00000000   900.00000000 58849 0.0000000000000
+    2   G01R24
++         2  3
%c M  cc GPS ccc cccc cccc cccc cccc ccccc ccccc ccccc ccccc
/* SP3-d allows long comment lines, this one is well beyond the sixty columns of SP3-c
*  2020  1  1  0  0  0.00000000
PG01  13000.000001 -20000.000002   9000.000003     10.000000
VG01  -1000.000000   2000.000000  -3000.000000      0.000000
PR24 -11000.000004  14000.000005 -18000.000006     20.000000
VR24   1000.000000   2000.000000   3000.000000      0.000000
*  2020  1  1  0 15 xx.00000000
PG01  13001.000001 -20001.000002   9001.000003     10.000000
*  2020  1  1  0 30  0.00000000
PG01  13002.000001 -20002.0000zz   9002.000003     10.000000
PR24 -11002.000004  14002.000005 -18002.000006     20.000000
EOF
";
    let f = parse_sp3_str(text).unwrap();
    assert_eq!(f.header.version, Sp3Version::D);
    assert_eq!(f.header.data_type, 'V');
    assert_eq!(f.header.satellites, vec![sat("G01"), sat("R24")]);
    assert_eq!(f.epochs.len(), 2);
    assert_eq!(f.records.len(), 3);
    let bad_lines: Vec<usize> = f.issues.iter().map(|i| i.line).collect();
    // Broken epoch, the record orphaned by it, the broken coordinate, and the
    // epoch count mismatch reported against the header.
    assert!(bad_lines.contains(&12) && bad_lines.contains(&13) && bad_lines.contains(&15));
    assert!(f.issues.iter().any(|i| i.reason.contains("declares 3 epochs")));
}

#[test]
fn header_errors() {
    assert!(matches!(parse_sp3_str(""), Err(Error::MalformedHeader(_))));
    assert!(matches!(
        parse_sp3_str("#bP2010  8  1  0  0  0.00000000      96\n"),
        Err(Error::UnknownVersion('b'))
    ));
    let missing_list = "#cP2010  8  1  0  0  0.00000000       1 ORBIT IGS08 HLM  IGS\n\
## 1595      0.00000000   900.00000000 55409 0.0000000000000\n\
*  2010  8  1  0  0  0.00000000\nEOF\n";
    assert!(matches!(parse_sp3_str(missing_list), Err(Error::MalformedHeader(_))));
}

fn corpus(days: usize) -> (CorpusSpec, Vec<String>) {
    let spec = CorpusSpec::new(NaiveDate::from_ymd_opt(2010, 8, 1).unwrap(), days, vec![sat("G08"), sat("G25")]);
    let texts = generate_records(&spec)
        .unwrap()
        .iter()
        .map(|b| write_sp3(b, &spec.satellites, 900.0, "").unwrap())
        .collect();
    (spec, texts)
}

fn store_from(texts: &[String]) -> RecordStore {
    let mut s = RecordStore::new();
    for (i, text) in texts.iter().enumerate() {
        s.add_file(&parse_sp3_str(text).unwrap(), format!("day{i}"));
    }
    s
}

#[test]
fn four_daily_files_make_an_equidistant_window() {
    let (spec, texts) = corpus(4);
    let store = store_from(&texts);
    let w = assemble_window(&store, sat("G08"), Coordinate::X, spec.start_epoch(), 4, 900.0, DEFAULT_MAX_GAP_FRACTION).unwrap();
    assert_eq!(w.lattice.len(), 384);
    assert_eq!(w.lattice.kind(), LatticeKind::Equidistant);
    assert!(w.series.gaps.is_empty());
    let unique: HashSet<_> = w.series.provenance.iter().collect();
    assert_eq!(unique.len(), 384);
}

#[test]
fn missing_epoch_gives_perturbed_lattice() {
    let (spec, mut texts) = corpus(4);
    let victim = "*  2010  8  2  5  0  0.00000000";
    let day = &mut texts[1];
    let start = day.find(victim).unwrap();
    let end = start + day[start..].find("\n*").unwrap() + 1;
    day.replace_range(start..end, "");
    let store = store_from(&texts);
    let w = assemble_window(&store, sat("G08"), Coordinate::Z, spec.start_epoch(), 4, 900.0, DEFAULT_MAX_GAP_FRACTION).unwrap();
    assert_eq!(w.lattice.len(), 383);
    assert_eq!(w.lattice.kind(), LatticeKind::Perturbed);
    assert_eq!(w.series.gaps, vec![96 + 20]);
    assert_eq!(w.nominal_len(), 384);
    assert!(matches!(
        assemble_window(&store, sat("G08"), Coordinate::Z, spec.start_epoch(), 0, 900.0, 0.05),
        Err(Error::InvalidParameters(_))
    ));
    assert!(matches!(
        assemble_window(&store, sat("G08"), Coordinate::Z, spec.start_epoch(), 5, 900.0, 0.05),
        Err(Error::InsufficientCoverage { missing: 97, expected: 480 })
    ));
}

#[test]
fn later_file_wins_at_duplicated_midnight() {
    let (spec, texts) = corpus(2);
    // Append the next midnight to the first day with a 1 cm offset.
    let midnight = t(2010, 8, 2, 0, 0);
    let second = parse_sp3_str(&texts[1]).unwrap();
    let mut dup: Vec<_> = second.records.iter().filter(|r| r.epoch == midnight).cloned().collect();
    for r in &mut dup {
        r.position[0] -= 1e-5;
    }
    let mut first = parse_sp3_str(&texts[0]).unwrap();
    first.records.extend(dup.clone());
    let a = {
        let mut s = RecordStore::new();
        s.add_file(&first, "a");
        s.add_file(&second, "b");
        s
    };
    let b = {
        let mut s = RecordStore::new();
        s.add_file(&second, "b");
        s.add_file(&first, "a");
        s
    };
    for store in [&a, &b] {
        let w = assemble_window(store, sat("G25"), Coordinate::X, spec.start_epoch(), 2, 900.0, 0.05).unwrap();
        assert_eq!(w.series.values[96], second.records.iter().find(|r| r.epoch == midnight && r.satellite == sat("G25")).unwrap().position[0]);
        assert_eq!(w.series.provenance[96].file, "b");
        assert_eq!(w.series.shadows.len(), 1);
        assert_eq!(w.series.shadows[0].index, 96);
        assert!((w.series.values[96] - w.series.shadows[0].value - 1e-5).abs() < 1e-9);
    }
    let wa = assemble_window(&a, sat("G08"), Coordinate::Y, spec.start_epoch(), 2, 900.0, 0.05).unwrap();
    let wb = assemble_window(&b, sat("G08"), Coordinate::Y, spec.start_epoch(), 2, 900.0, 0.05).unwrap();
    assert_eq!(wa, wb);
    assert_eq!(a.epoch_range(sat("G08")), Some((spec.start_epoch(), spec.start_epoch() + TimeDelta::minutes(15 * 191))));
}

#[test]
fn directory_scan_and_parallel_parse() {
    let dir = tempfile::tempdir().unwrap();
    let (_, texts) = corpus(3);
    for (i, text) in texts.iter().enumerate() {
        std::fs::write(dir.path().join(format!("igs1595{i}.sp3")), text).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
    let all = scan_dir(dir.path(), None).unwrap();
    assert_eq!(all.len(), 4);
    let sp3 = scan_dir(dir.path(), Some("igs*.sp3")).unwrap();
    assert_eq!(sp3.len(), 3);
    let seq: Vec<_> = parse_files(&sp3, Execution::Sequential).into_iter().map(Result::unwrap).collect();
    let par: Vec<_> = parse_files(&sp3, Execution::Parallel).into_iter().map(Result::unwrap).collect();
    assert_eq!(seq, par);
    assert!(seq.iter().all(|f| f.source.is_some()));
}
