use hahnfit::basis::{build_basis, build_basis_extended, DEFAULT_ORTH_TOL};
use hahnfit::hahn::exact::exact_normalized_at_integer;
use hahnfit::hahn::{normalized_hahn_value, HahnParams};
use hahnfit::real::{DoubleDouble, Real};
use hahnfit::summation::dot_compensated;
use hahnfit::{Execution, Lattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Classical `Q_n^N(N) = (-1)^n`; the basis is positive at `x_N`.
fn oracle_sign(n: usize) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[test]
fn agrees_with_exact_rational_values_up_to_forty() {
    for upper in [1usize, 2, 5, 13, 24, 35, 40] {
        let b = build_basis(&Lattice::equidistant(upper).unwrap(), upper, DEFAULT_ORTH_TOL).unwrap();
        for n in 0..=upper {
            let p = HahnParams::new(upper, n).unwrap();
            for j in 0..=upper {
                let want = oracle_sign(n) * exact_normalized_at_integer(p, j as i64);
                let got = b.value(j, n);
                assert!(
                    (got - want).abs() <= 1e-9,
                    "N={upper} n={n} x={j}: {got} vs {want}"
                );
            }
        }
    }
}

/// The closed form cancels catastrophically in the middle of the lattice as
/// `N` grows; this pins how far it can be trusted.
#[test]
fn log_gamma_path_agrees_with_exact_path() {
    for (upper, tol) in [(10usize, 1e-12), (20, 1e-9), (30, 1e-6)] {
        for n in 0..=upper {
            let p = HahnParams::new(upper, n).unwrap();
            for j in 0..=upper {
                let a = normalized_hahn_value(p, j as f64).unwrap();
                let e = exact_normalized_at_integer(p, j as i64);
                assert!((a - e).abs() <= tol * (1.0 + e.abs()), "N={upper} n={n} x={j}");
            }
        }
    }
}

#[test]
fn lattice_symmetry() {
    for upper in [7usize, 30] {
        for n in 0..=upper {
            let p = HahnParams::new(upper, n).unwrap();
            for m in 0..=upper / 2 {
                let a = exact_normalized_at_integer(p, m as i64);
                let b = exact_normalized_at_integer(p, (upper - m) as i64);
                assert_eq!(a, oracle_sign(n) * b, "N={upper} n={n} m={m}");
            }
        }
    }
    let b = build_basis(&Lattice::equidistant(30).unwrap(), 30, DEFAULT_ORTH_TOL).unwrap();
    for n in 0..=30 {
        for m in 0..=15 {
            let (lo, hi) = (b.value(m, n), b.value(30 - m, n));
            assert!((lo - oracle_sign(n) * hi).abs() <= 1e-11, "n={n} m={m}");
        }
    }
}

#[test]
fn orthonormal_at_operating_point() {
    let l = Lattice::equidistant(384).unwrap();
    let b = build_basis(&l, 383, DEFAULT_ORTH_TOL).unwrap();
    let g = b.gram_report(Execution::Parallel);
    assert!(g.max_offdiag <= b.threshold(), "{g:?}");
    assert!(g.max_norm_dev <= 1e-14, "{g:?}");
    assert!(b.sweeps()[1..].iter().all(|&s| s >= 1 && s <= 20));
}

#[test]
fn endpoint_decay_at_degree_200() {
    let b = build_basis(&Lattice::equidistant(384).unwrap(), 200, DEFAULT_ORTH_TOL).unwrap();
    let col = b.column(200).unwrap();
    let peak = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for j in [0usize, 1, 2] {
        assert!(col[j].abs() <= 1e-6 * peak, "j={j}: {} vs {peak}", col[j]);
        assert!(col[384 - j].abs() <= 1e-6 * peak);
    }
}

#[test]
fn degree_exactness() {
    let l = Lattice::equidistant(384).unwrap();
    let b = build_basis(&l, 50, DEFAULT_ORTH_TOL).unwrap();
    let xs = l.normalize().unwrap().points().to_vec();
    for m in [0usize, 1, 7, 20, 35, 50] {
        let v: Vec<f64> = xs.iter().map(|x| x.powi(m as i32)).collect();
        let mut rec = vec![0.0; v.len()];
        for k in 0..=m {
            let c = b.column(k).unwrap();
            let coef = dot_compensated(&v, c);
            rec.iter_mut().zip(c).for_each(|(r, q)| *r += coef * q);
        }
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let err = v.iter().zip(&rec).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err <= 1e-10 * scale, "m={m} err={err}");
    }
}

#[test]
fn parseval_on_full_basis() {
    let l = Lattice::equidistant(150).unwrap();
    let b = build_basis(&l, 150, DEFAULT_ORTH_TOL).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let f: Vec<f64> = (0..151).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let energy: f64 = b.columns().map(|c| dot_compensated(&f, c).powi(2)).sum();
        let norm_sq = dot_compensated(&f, &f);
        assert!(((energy - norm_sq) / norm_sq).abs() <= 1e-10);
    }
}

#[test]
fn extended_precision_reaches_the_exact_values() {
    let l = Lattice::equidistant(60).unwrap();
    let ext = build_basis_extended(&l, 60, DoubleDouble::EPSILON).unwrap();
    for n in 0..=60 {
        let p = HahnParams::new(60, n).unwrap();
        for j in 0..=60 {
            let want = oracle_sign(n) * exact_normalized_at_integer(p, j as i64);
            assert!((ext.value(j, n) - want).abs() < 1e-14, "n={n} j={j}");
        }
    }
}

#[test]
fn working_precision_tracks_extended_at_small_scale() {
    let l = Lattice::equidistant(30).unwrap();
    let work = build_basis(&l, 30, DEFAULT_ORTH_TOL).unwrap();
    let ext = build_basis_extended(&l, 30, DoubleDouble::EPSILON).unwrap();
    for n in 0..=30 {
        for j in 0..=30 {
            assert!((work.value(j, n) - ext.value(j, n)).abs() < 1e-11, "n={n} j={j}");
        }
    }
}

#[test]
fn seeded_perturbed_lattices_stay_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let mut pts: Vec<f64> = (0..200).map(|j| 900.0 * j as f64).collect();
        for _ in 0..rng.gen_range(1..6) {
            let idx = rng.gen_range(1..pts.len() - 1);
            pts.remove(idx);
        }
        let l = Lattice::new(pts).unwrap();
        let b = build_basis(&l, 120, DEFAULT_ORTH_TOL).unwrap();
        let g = b.gram_report(Execution::Parallel);
        assert!(g.max_offdiag <= b.threshold(), "{g:?}");
        assert!(g.max_norm_dev <= 1e-14);
    }
}
