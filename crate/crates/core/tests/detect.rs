use chrono::{NaiveDate, TimeDelta};
use hahnfit::detect::{
    detect_in_series, sliding_analysis, DetectorConfig, EventKind, LocalKind,
};
use hahnfit::sp3::{assemble_window, parse_sp3_str, Coordinate, RecordStore, SatId};
use hahnfit::synth::{generate_records, impulse_series, step_series, write_sp3, CorpusSpec, Injection, InjectionKind};
use hahnfit::{build_basis, BasisCache, DataSeries, Execution, Lattice, OrthoBasis};
use proptest::prelude::*;

fn geometry(points: usize, degree: usize) -> (OrthoBasis, DetectorConfig) {
    let lattice = Lattice::equidistant(points - 1).unwrap();
    let basis = build_basis(&lattice, degree, f64::EPSILON).unwrap();
    let cfg = DetectorConfig {
        window_points: points,
        degree,
        ..DetectorConfig::default()
    };
    (basis, cfg)
}

fn series(basis: &OrthoBasis, values: Vec<f64>) -> DataSeries {
    DataSeries::new(basis.lattice().clone(), values, "km").unwrap()
}

fn background(n: usize, amp: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = j as f64 / (n - 1) as f64;
            amp * (8.0 * std::f64::consts::TAU * t + 0.3).sin() + 0.1 * amp * t
        })
        .collect()
}

#[test]
fn unit_jump_and_outlier_at_small_geometry() {
    let (basis, cfg) = geometry(101, 50);
    let jump = detect_in_series(&basis, &series(&basis, step_series(101, 40, 1.0)), &cfg).unwrap();
    assert_eq!(jump.events.len(), 1, "{jump:?}");
    let e = &jump.events[0];
    assert_eq!((e.index, e.kind), (40, LocalKind::Jump));
    assert!((e.amplitude - 1.0).abs() < 0.1);
    assert!((e.spike_estimate - 1.0).abs() < 0.1);

    let out = detect_in_series(&basis, &series(&basis, impulse_series(101, 40, 1.0)), &cfg).unwrap();
    assert_eq!(out.events.len(), 1, "{out:?}");
    let e = &out.events[0];
    assert_eq!((e.index, e.kind), (40, LocalKind::Outlier));
    assert!((e.amplitude - 1.0).abs() < 0.1);
}

#[test]
fn scale_equivariance() {
    let (basis, cfg) = geometry(384, 200);
    let mut v = background(384, 2.6e4);
    v.iter_mut().enumerate().filter(|(j, _)| *j >= 190).for_each(|(_, x)| *x += 0.8);
    v[300] -= 0.5;
    let base = detect_in_series(&basis, &series(&basis, v.clone()), &cfg).unwrap();
    assert_eq!(base.events.len(), 2, "{base:?}");
    for c in [1e-3, 0.1, 3.3, 7.0, -2.0, 1e3] {
        let scaled = detect_in_series(&basis, &series(&basis, v.iter().map(|x| c * x).collect()), &cfg).unwrap();
        assert_eq!(scaled.events.len(), base.events.len());
        for (a, b) in base.events.iter().zip(&scaled.events) {
            assert_eq!((a.index, a.kind), (b.index, b.kind));
            assert!((b.amplitude - c * a.amplitude).abs() <= 1e-10 * (c * a.amplitude).abs(), "{a:?} {b:?}");
        }
    }
}

#[test]
fn translation_equivariance() {
    let (basis, cfg) = geometry(384, 200);
    for p in [60, 61, 150, 222, 300] {
        let mut v = background(384, 100.0);
        v.iter_mut().skip(p).for_each(|x| *x += 0.01);
        let s = detect_in_series(&basis, &series(&basis, v), &cfg).unwrap();
        assert_eq!(s.events.len(), 1, "{p}: {s:?}");
        assert_eq!((s.events[0].index, s.events[0].kind), (p, LocalKind::Jump));
    }
}

#[test]
fn masked_edges_stay_silent() {
    let (basis, cfg) = geometry(384, 200);
    for p in [2, 5, 380] {
        let mut v = background(384, 100.0);
        v.iter_mut().skip(p).for_each(|x| *x += 0.5);
        let s = detect_in_series(&basis, &series(&basis, v), &cfg).unwrap();
        assert!(s.events.is_empty(), "jump at {p}: {s:?}");
        let mut v = background(384, 100.0);
        v[p] += 0.5;
        let s = detect_in_series(&basis, &series(&basis, v), &cfg).unwrap();
        assert!(s.events.is_empty(), "outlier at {p}: {s:?}");
    }
}

#[test]
fn anomalies_lost_to_the_fit_are_hidden() {
    let (basis, cfg) = geometry(384, 200);
    for (p, q) in [(362, 20), (361, 20), (250, 360), (30, 365), (355, 22)] {
        let mut v = background(384, 2.6e4);
        v.iter_mut().skip(p).for_each(|x| *x += 0.8);
        v[q] -= 0.5;
        let s = detect_in_series(&basis, &series(&basis, v), &cfg).unwrap();
        let shown: Vec<_> = s.events.iter().map(|e| (e.index, e.kind)).collect();
        let want: Vec<_> = [(p, LocalKind::Jump), (q, LocalKind::Outlier)]
            .into_iter()
            .filter(|(j, _)| (25..359).contains(j))
            .collect();
        assert_eq!(shown, want, "{p} {q}: {s:?}");
        assert_eq!(s.hidden, 2 - want.len());
    }
}

#[test]
fn magnitudes_hold_across_five_decades() {
    let (basis, cfg) = geometry(384, 200);
    let amp = 2.6e4;
    for rel in [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let size = rel * amp;
        let mut v = background(384, amp);
        v.iter_mut().skip(170).for_each(|x| *x += size);
        v[260] += size;
        let s = detect_in_series(&basis, &series(&basis, v), &cfg).unwrap();
        let kinds: Vec<_> = s.events.iter().map(|e| (e.index, e.kind)).collect();
        assert_eq!(kinds, vec![(170, LocalKind::Jump), (260, LocalKind::Outlier)], "rel {rel}");
        for e in &s.events {
            assert!((e.amplitude / size - 1.0).abs() < 0.1, "rel {rel}: {e:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn low_degree_polynomials_are_clean(coeffs in proptest::collection::vec(-1e3f64..1e3, 1..=51)) {
        let (basis, cfg) = geometry(384, 200);
        let v: Vec<f64> = (0..384)
            .map(|j| {
                let t = 2.0 * j as f64 / 383.0 - 1.0;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            })
            .collect();
        let s = detect_in_series(&basis, &series(&basis, v), &cfg).unwrap();
        prop_assert!(s.events.is_empty(), "{:?}", s.events);
    }
}

fn sat(s: &str) -> SatId {
    s.parse().unwrap()
}

#[test]
fn sliding_windows_on_synthetic_orbits() {
    let start = NaiveDate::from_ymd_opt(2010, 8, 1).unwrap();
    let mut spec = CorpusSpec::new(start, 6, vec![sat("G08"), sat("G25")]);
    let midnight = start.and_hms_opt(0, 0, 0).unwrap() + TimeDelta::days(3);
    let noon = start.and_hms_opt(12, 15, 0).unwrap() + TimeDelta::days(1);
    spec.injections = vec![
        Injection {
            kind: InjectionKind::Jump,
            satellite: sat("G08"),
            coordinate: Coordinate::X,
            epoch: midnight,
            magnitude_km: 0.8,
        },
        Injection {
            kind: InjectionKind::Outlier,
            satellite: sat("G25"),
            coordinate: Coordinate::Z,
            epoch: noon,
            magnitude_km: -0.02,
        },
    ];
    let mut store = RecordStore::new();
    for (i, block) in generate_records(&spec).unwrap().iter().enumerate() {
        store.add_file(&parse_sp3_str(&write_sp3(block, &spec.satellites, 900.0, "").unwrap()).unwrap(), format!("d{i}"));
    }
    let cache = BasisCache::in_memory();
    let cfg = DetectorConfig::default();
    let mut found = Vec::new();
    for s in ["G08", "G25"] {
        for c in Coordinate::ALL {
            let w = assemble_window(&store, sat(s), c, spec.start_epoch(), 6, 900.0, 1.0).unwrap();
            let seq = sliding_analysis(&w.series, &cache, &cfg, Execution::Sequential).unwrap();
            let par = sliding_analysis(&w.series, &cache, &cfg, Execution::Parallel).unwrap();
            assert_eq!(seq, par);
            assert_eq!(seq.failed_windows(), 0);
            assert_eq!(seq.windows.len(), 3);
            found.extend(seq.events);
        }
    }
    assert_eq!(cache.len(), 1);
    assert_eq!(found.len(), 2, "{found:#?}");
    let jump = &found[0];
    assert_eq!((jump.satellite, jump.coordinate, jump.epoch), (sat("G08"), Coordinate::X, midnight));
    assert_eq!(jump.kind, EventKind::AnomalousJump);
    assert!((jump.magnitude_km - 0.8).abs() < 0.08);
    assert!(jump.windows.len() >= 2);
    let out = &found[1];
    assert_eq!((out.satellite, out.coordinate, out.epoch), (sat("G25"), Coordinate::Z, noon));
    assert_eq!(out.kind, EventKind::Outlier);
    assert!((out.signed_km + 0.02).abs() < 0.002);
}
