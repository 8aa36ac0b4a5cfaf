mod common;

use proptest::prelude::*;
use rand::Rng;
use rfi_core::genetics::{
    constrained_covariance, correlation_matrix, genetic_correlation_dmi_rfi, genetic_correlation_dmi_sink,
    genetic_parameters, heritability_dmi, transform_covariance, transform_covariance_closed_form, StructuralMatrix,
};
use rfi_core::Matrix;

/// `Lambda^{-1} M Lambda'^{-1}` with the inverse from a general LU solve.
fn dense_oracle(lambda: &[f64], m: &Matrix) -> Matrix {
    let inv = StructuralMatrix::new(lambda).to_matrix().inverse().unwrap();
    inv.matmul(m).unwrap().matmul(&inv.transpose()).unwrap()
}

fn random_instance(rng: &mut rfi_core::dist::ChainRng) -> (Vec<f64>, Matrix) {
    let k = rng.random_range(2..=6);
    let lambda: Vec<f64> = (1..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let block = common::random_spd(k - 1, rng);
    let m = constrained_covariance(0.1 + rng.random::<f64>(), &block);
    (lambda, m)
}

#[test]
fn closed_form_matches_dense_products() {
    let mut rng = common::rng(10);
    for _ in 0..1000 {
        let (lambda, m) = random_instance(&mut rng);
        let oracle = dense_oracle(&lambda, &m);
        let closed = transform_covariance_closed_form(&lambda, &m).unwrap();
        let dense = transform_covariance(&StructuralMatrix::new(&lambda), &m).unwrap();
        let scale = oracle.as_slice().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        assert!(closed.max_abs_diff(&oracle) < 1e-12 * scale);
        assert!(dense.max_abs_diff(&oracle) < 1e-12 * scale);
    }
}

#[test]
fn correlations_match_normalized_transform() {
    let mut rng = common::rng(11);
    for _ in 0..1000 {
        let (lambda, g0) = random_instance(&mut rng);
        let k = g0.rows();
        let star = dense_oracle(&lambda, &g0);
        let sinks: Vec<usize> = (1..k).collect();
        let gs = g0.submatrix(&sinks, &sinks);
        let sa = g0[(0, 0)];
        for t in 0..k - 1 {
            let expect = star[(0, t + 1)] / (star[(0, 0)] * star[(t + 1, t + 1)]).sqrt();
            let got = genetic_correlation_dmi_sink(&lambda, &gs, sa, t).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
        // Cov(intake, RFI) on the genetic scale is the RFI genetic variance.
        let expect = sa / (star[(0, 0)] * sa).sqrt();
        assert!((genetic_correlation_dmi_rfi(&lambda, &gs, sa).unwrap() - expect).abs() < 1e-12);
    }
}

#[test]
fn heritabilities_from_transformed_diagonals() {
    let mut rng = common::rng(12);
    for _ in 0..200 {
        let (lambda, g0) = random_instance(&mut rng);
        let k = g0.rows();
        let r0 = constrained_covariance(0.2 + rng.random::<f64>(), &common::random_spd(k - 1, &mut rng));
        let p = genetic_parameters(&lambda, &g0, &r0).unwrap();
        let gs = dense_oracle(&lambda, &g0);
        let rs = dense_oracle(&lambda, &r0);
        let h_dmi = gs[(0, 0)] / (gs[(0, 0)] + rs[(0, 0)]);
        assert!((p.heritability[0] - h_dmi).abs() < 1e-12);
        let direct = heritability_dmi(g0[(0, 0)], r0[(0, 0)], p.delta_a, p.delta_e).unwrap();
        assert!((direct - h_dmi).abs() < 1e-12);
        assert!(p.correlation.max_abs_diff(&correlation_matrix(&gs).unwrap()) < 1e-12);
    }
}

#[test]
fn structural_matrix_has_unit_determinant() {
    let s = StructuralMatrix::new(&[0.351, 0.514, 0.117]);
    assert_eq!(s.determinant(), 1.0);
    let prod = s.to_matrix().matmul(&s.inverse_matrix()).unwrap();
    assert!(prod.max_abs_diff(&Matrix::identity(4)) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn transform_preserves_symmetry_and_sink_block(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (lambda, m) = random_instance(&mut rng);
        let t = transform_covariance_closed_form(&lambda, &m).unwrap();
        prop_assert!(t.is_symmetric(1e-14));
        for a in 1..m.rows() {
            for b in 1..m.rows() {
                prop_assert_eq!(t[(a, b)], m[(a, b)]);
            }
        }
        prop_assert!(t.cholesky().is_ok());
    }

    #[test]
    fn intake_correlations_are_bounded(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (lambda, g0) = random_instance(&mut rng);
        let k = g0.rows();
        let sinks: Vec<usize> = (1..k).collect();
        let gs = g0.submatrix(&sinks, &sinks);
        for t in 0..k - 1 {
            let r = genetic_correlation_dmi_sink(&lambda, &gs, g0[(0, 0)], t).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r));
        }
        let r = genetic_correlation_dmi_rfi(&lambda, &gs, g0[(0, 0)]).unwrap();
        prop_assert!(r > 0.0 && r <= 1.0);
    }
}
