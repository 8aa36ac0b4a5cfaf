mod common;

use rfi_core::data::{covariance_to_correlation, sample_covariance, trait_matrix, DIM_LEVELS};
use rfi_core::pedigree::{relationship_matrix, PedigreeEntry};
use rfi_core::simulator::{
    calibrated_truth, paper_replica_truth, published_correlation_matrix, simulate_genetic_values, simulate_pedigree,
    simulate_phenotypes, simulate_replica, DesignSizes, REPLICA_RFI_H2, REPLICA_SINK_H2,
};
use rfi_core::{Matrix, Pedigree};

#[test]
fn truth_reproduces_published_moments() {
    let truth = paper_replica_truth();
    let p = truth.phenotypic_covariance().unwrap();
    let published = published_correlation_matrix();
    for a in 0..4 {
        for b in 0..4 {
            // Intake-sink entries are implied by the rounded coefficients.
            let tol = if a == 0 && b != 0 || b == 0 && a != 0 { 0.005 } else { 1e-12 };
            assert!((p[(a, b)] - published[(a, b)]).abs() < tol, "({a},{b})");
        }
    }
    let params = truth.genetic_parameters().unwrap();
    let h = &params.heritability;
    assert!((h[4] - REPLICA_RFI_H2).abs() < 1e-12);
    for t in 0..3 {
        assert!((h[t + 1] - REPLICA_SINK_H2[t]).abs() < 1e-12, "sink {t}: {}", h[t + 1]);
    }
    assert!(rfi_core::genetics::is_constrained(&truth.g0, 0.0));
    assert!(rfi_core::genetics::is_constrained(&truth.r0, 0.0));
}

#[test]
fn large_sample_correlations_match_published() {
    let truth = paper_replica_truth();
    let ped = simulate_pedigree(10_000, 40_000, 100_000, 17).unwrap();
    let sizes = DesignSizes { dim_levels: DIM_LEVELS.to_vec(), n_test_weeks: 5_000 };
    let recs = simulate_phenotypes(&ped, &truth, &sizes, 17).unwrap();
    assert_eq!(recs.len(), 100_000);
    let c = covariance_to_correlation(&sample_covariance(&trait_matrix(&recs)));
    let diff = c.max_abs_diff(&published_correlation_matrix());
    assert!(diff < 0.01, "max correlation difference {diff}");
}

#[test]
fn genetic_values_follow_kronecker_covariance() {
    let ped = Pedigree::new(vec![
        PedigreeEntry::founder(1),
        PedigreeEntry::founder(2),
        PedigreeEntry::new(3, 1, 2),
        PedigreeEntry::new(4, 1, 2),
        PedigreeEntry::new(5, 3, 4),
        PedigreeEntry::new(6, 5, 1),
    ])
    .unwrap();
    let g = Matrix::from_rows(&[&[1.0, 0.4], &[0.4, 0.5]]);
    let a = relationship_matrix(&ped);
    let (n, k, reps) = (ped.len(), 2, 40_000);
    let mut acc = Matrix::zeros(n * k, n * k);
    for r in 0..reps {
        let v = simulate_genetic_values(&ped, &g, r as u64).unwrap();
        let x = v.as_slice();
        for p in 0..n * k {
            for q in 0..n * k {
                acc[(p, q)] += x[p] * x[q];
            }
        }
    }
    let emp = acc.scale(1.0 / reps as f64);
    for p in 0..n * k {
        for q in 0..n * k {
            let want = a.get(p / k, q / k) * g[(p % k, q % k)];
            assert!((emp[(p, q)] - want).abs() < 0.05, "({p},{q}) {} vs {want}", emp[(p, q)]);
        }
    }
}

#[test]
fn replica_is_deterministic_and_sized() {
    let truth = paper_replica_truth();
    let a = simulate_replica(&truth, 645, true).unwrap();
    let b = simulate_replica(&truth, 645, true).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.pedigree.len(), 1247);
    assert_eq!(a.records.len(), 645);
    let c = simulate_replica(&truth, 646, true).unwrap();
    assert_ne!(a.records, c.records);
    let s = sample_covariance(&trait_matrix(&a.records));
    assert!(s.max_abs_diff(&published_correlation_matrix()) < 1e-12);
}

#[test]
fn test_week_share_is_bounded() {
    assert!(calibrated_truth(0.0).is_ok());
    assert!(calibrated_truth(0.6).is_err());
}
