use hahnfit::basis::{build_basis, DEFAULT_ORTH_TOL};
use hahnfit::conditioning::{basis_gram_condition, monomial_condition};
use hahnfit::Lattice;

#[test]
fn monomial_design_is_ill_conditioned() {
    let c11 = monomial_condition(11).unwrap();
    let c31 = monomial_condition(31).unwrap();
    assert!(c11.condition > 1e8, "{c11:?}");
    assert!(c31.condition > 1e19, "{c31:?}");
    // Independent high-precision singular values give 1.15575e8 and 7.89621e25.
    assert!((c11.condition / 1.15575e8 - 1.0).abs() < 1e-4);
    assert!((c31.condition / 7.89621e25 - 1.0).abs() < 1e-4);
}

#[test]
fn orthogonal_basis_is_perfectly_conditioned() {
    for n in [11usize, 31] {
        let b = build_basis(&Lattice::equidistant(n - 1).unwrap(), n - 1, DEFAULT_ORTH_TOL).unwrap();
        let k = basis_gram_condition(&b);
        assert!(k >= 1.0 && k <= 1.0 + 1e-10, "{n}: {k}");
    }
}
