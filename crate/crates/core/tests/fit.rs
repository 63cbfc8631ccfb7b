use hahnfit::basis::{build_basis, DEFAULT_ORTH_TOL};
use hahnfit::summation::{dot_compensated, norm2};
use hahnfit::{detrend, project, residue_tail, DataSeries, Lattice, OrthoBasis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn basis(upper: usize, m: usize) -> OrthoBasis {
    build_basis(&Lattice::equidistant(upper).unwrap(), m, DEFAULT_ORTH_TOL).unwrap()
}

fn series(v: Vec<f64>) -> DataSeries {
    DataSeries::new(Lattice::equidistant(v.len() - 1).unwrap(), v, "").unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

#[test]
fn degree_ten_polynomial_is_reproduced() {
    let b = basis(100, 50);
    let v: Vec<f64> = (0..101)
        .map(|j| {
            let t = j as f64 / 100.0;
            (0..=10).map(|k| (k as f64 - 4.5) * t.powi(k)).sum()
        })
        .collect();
    let f = detrend(&b, &series(v.clone()), 50).unwrap();
    assert!(max_abs(&f.residue) <= 1e-9 * max_abs(&v));
}

#[test]
fn unit_step_gives_two_symmetric_spikes() {
    let b = basis(100, 50);
    let v: Vec<f64> = (0..101).map(|j| if j >= 40 { 1.0 } else { 0.0 }).collect();
    let r = detrend(&b, &series(v), 50).unwrap().residue;
    let (left, right) = (r[39], r[40]);
    assert!(left < 0.0 && right > 0.0);
    for s in [left.abs(), right.abs()] {
        assert!((s - 0.33).abs() <= 0.02, "{left} {right}");
    }
    let others = r.iter().enumerate().filter(|(j, _)| *j != 39 && *j != 40);
    assert!(others.fold(0.0f64, |a, (_, x)| a.max(x.abs())) < 0.5 * right);
}

#[test]
fn unit_impulse_gives_positive_spike_with_recoil() {
    let b = basis(100, 50);
    let v: Vec<f64> = (0..101).map(|j| if j == 40 { 1.0 } else { 0.0 }).collect();
    let r = detrend(&b, &series(v), 50).unwrap().residue;
    assert!(r[40] > 0.0 && r[39] < 0.0 && r[41] < 0.0);
    assert!((r[39] - r[41]).abs() < 0.05 * r[40]);
    assert!(r[39].abs() < r[40] && r[41].abs() < r[40]);
    let total = r[40] - 0.5 * (r[39] + r[41]);
    assert!(total > 0.8 && total < 1.0, "{total}");
}

#[test]
fn tail_and_direct_residues_agree() {
    let b = basis(100, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<f64> = (0..101).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let s = series(v);
    let direct = detrend(&b, &s, 75).unwrap();
    let tail = residue_tail(&b, &project(&b, &s).unwrap(), Some(75)).unwrap();
    let scale = max_abs(&direct.residue);
    for (a, t) in direct.residue.iter().zip(&tail) {
        assert!((a - t).abs() <= 1e-10 * scale);
    }
}

#[test]
fn parseval_on_random_series() {
    let b = basis(120, 120);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v: Vec<f64> = (0..121).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let c = project(&b, &series(v.clone())).unwrap();
    let energy: f64 = c.iter().map(|x| x * x).sum();
    let norm = dot_compensated(&v, &v);
    assert!(((energy - norm) / norm).abs() <= 1e-10);
}

#[test]
fn boundary_decay_with_interior_jump() {
    let b = basis(383, 200);
    let v: Vec<f64> = (0..384)
        .map(|j| {
            let t = j as f64 / 383.0;
            2.6e4 * (6.0 * t).sin() + if j >= 190 { 1.0 } else { 0.0 }
        })
        .collect();
    let r = detrend(&b, &series(v), 200).unwrap().residue;
    let interior = max_abs(&r[3..381]);
    for j in [0, 1, 2, 381, 382, 383] {
        assert!(r[j].abs() <= 1e-4 * interior, "j={j}: {} vs {interior}", r[j]);
    }
}

#[test]
fn detrending_is_idempotent() {
    let b = basis(200, 120);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v: Vec<f64> = (0..201).map(|j| (j as f64 * 0.05).sin() * 1e3 + rng.gen_range(-1.0..1.0)).collect();
    let first = detrend(&b, &series(v.clone()), 100).unwrap().residue;
    let second = detrend(&b, &series(first.clone()), 100).unwrap().residue;
    let scale = norm2(&v);
    for (a, c) in first.iter().zip(&second) {
        assert!((a - c).abs() <= b.threshold() * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn detrend_is_linear(
        seed in any::<u64>(),
        alpha in -1e3f64..1e3,
        beta in -1e3f64..1e3,
    ) {
        let b = basis(80, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..81).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..81).map(|j| (j as f64 * 0.1).cos() + rng.gen_range(-0.1..0.1)).collect();
        let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| alpha * x + beta * y).collect();
        let rf = detrend(&b, &series(f), 30).unwrap();
        let rg = detrend(&b, &series(g), 30).unwrap();
        let rh = detrend(&b, &series(h), 30).unwrap();
        let scale = alpha.abs().max(beta.abs()).max(1e-300) * 10.0;
        for k in 0..=40 {
            let want = alpha * rf.coefficients[k] + beta * rg.coefficients[k];
            prop_assert!((rh.coefficients[k] - want).abs() <= 1e-12 * scale);
        }
        for j in 0..81 {
            let want = alpha * rf.residue[j] + beta * rg.residue[j];
            prop_assert!((rh.residue[j] - want).abs() <= 1e-12 * scale);
        }
    }
}
