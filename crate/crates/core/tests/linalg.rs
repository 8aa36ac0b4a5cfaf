mod common;

use proptest::prelude::*;
use rfi_core::mt::{cholesky_reparameterize, partial_regression, recursive_order};
use rfi_core::{Error, Matrix};

#[test]
fn singular_matrix_is_not_positive_definite() {
    let m = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
    assert!(matches!(m.cholesky(), Err(Error::NotPositiveDefinite(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn factorizations_reconstruct(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = common::rng(seed);
        let s = common::random_spd(k, &mut rng);
        let chol = s.cholesky().unwrap();
        let llt = chol.l().matmul(&chol.l().transpose()).unwrap();
        let scale = s.as_slice().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        prop_assert!(llt.max_abs_diff(&s) < 1e-10 * scale);
        prop_assert!(chol.inverse().matmul(&s).unwrap().max_abs_diff(&Matrix::identity(k)) < 1e-7);
        let (l, d) = s.ldl().unwrap();
        let ldl = Matrix::from_fn(k, k, |i, j| l[(i, j)] * d[j]).matmul(&l.transpose()).unwrap();
        prop_assert!(ldl.max_abs_diff(&s) < 1e-10 * scale);
        prop_assert!(d.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn cholesky_structure_reconstructs_in_any_order(seed in any::<u64>(), k in 2usize..7) {
        let mut rng = common::rng(seed);
        let s = common::random_spd(k, &mut rng);
        let scale = s.as_slice().iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let order = recursive_order(k);
        let c = cholesky_reparameterize(&s, &order).unwrap();
        prop_assert!(c.reconstruct().max_abs_diff(&s) < 1e-10 * scale);
        let b = c.coefficients().unwrap();
        let pr = partial_regression(&s).unwrap();
        for t in 1..k {
            prop_assert!((b[(0, t)] - pr[t - 1]).abs() < 1e-8 * (1.0 + pr[t - 1].abs()));
        }
        let mut shuffled: Vec<usize> = (0..k).collect();
        shuffled.rotate_left(seed as usize % k);
        let c2 = cholesky_reparameterize(&s, &shuffled).unwrap();
        prop_assert!(c2.reconstruct().max_abs_diff(&s) < 1e-10 * scale);
    }
}
