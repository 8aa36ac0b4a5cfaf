use proptest::prelude::*;
use rfi_core::diagnostics::{average_ranks, quantile_sorted, sf_trajectory, shrink_factor, spearman, summarize};
use rfi_core::dist::{self, standard_normal};

/// Shrink factor written out from its definition.
fn oracle_sf(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let l = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / l).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = l * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1.0);
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (l - 1.0))
        .sum::<f64>()
        / m;
    (((l - 1.0) / l * w + b / l) / w).sqrt()
}

fn chains(seed: u64, m: usize, l: usize, offset: f64) -> Vec<Vec<f64>> {
    let mut rng = dist::stream(seed, 3);
    (0..m).map(|c| (0..l).map(|_| standard_normal(&mut rng) + offset * c as f64).collect()).collect()
}

fn refs(c: &[Vec<f64>]) -> Vec<&[f64]> {
    c.iter().map(|v| v.as_slice()).collect()
}

#[test]
fn shrink_factor_matches_definition() {
    for (seed, offset) in [(1, 0.0), (2, 0.5), (3, 3.0)] {
        let c = chains(seed, 5, 300, offset);
        let sf = shrink_factor(&refs(&c)).unwrap();
        assert!((sf - oracle_sf(&c)).abs() < 1e-12);
    }
    let mixed = shrink_factor(&refs(&chains(4, 30, 2000, 0.0))).unwrap();
    assert!(mixed < 1.01);
    assert!(shrink_factor(&refs(&chains(5, 4, 200, 2.0))).unwrap() > 1.5);
}

#[test]
fn trajectory_uses_prefixes() {
    let c = chains(6, 3, 230, 0.0);
    let traj = sf_trajectory(&refs(&c), 50).unwrap();
    let its: Vec<usize> = traj.iter().map(|t| t.0).collect();
    assert_eq!(its, [50, 100, 150, 200, 230]);
    let prefix: Vec<Vec<f64>> = c.iter().map(|v| v[..100].to_vec()).collect();
    assert!((traj[1].1 - oracle_sf(&prefix)).abs() < 1e-12);
}

#[test]
fn degenerate_inputs_are_errors() {
    assert!(shrink_factor(&[&[1.0, 2.0, 3.0][..]]).is_err());
    assert!(shrink_factor(&[&[1.0, 1.0][..], &[1.0, 1.0][..]]).is_err());
    assert!(shrink_factor(&[&[1.0, 2.0][..], &[1.0][..]]).is_err());
    assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn ranks_average_ties() {
    assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
}

#[test]
fn quantiles_interpolate_linearly() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(quantile_sorted(&x, 0.5), 3.0);
    assert!((quantile_sorted(&x, 0.025) - 1.1).abs() < 1e-12);
    let s = summarize(&[4.0, 2.0, 1.0, 5.0, 3.0]).unwrap();
    assert_eq!(s.median, 3.0);
    assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shrink_factor_is_affine_invariant(seed in any::<u64>(), a in 0.1f64..50.0, b in -100.0f64..100.0) {
        let c = chains(seed, 4, 120, 0.3);
        let t: Vec<Vec<f64>> = c.iter().map(|v| v.iter().map(|x| a * x + b).collect()).collect();
        let (s1, s2) = (shrink_factor(&refs(&c)).unwrap(), shrink_factor(&refs(&t)).unwrap());
        prop_assert!((s1 - s2).abs() < 1e-9);
        prop_assert!(s1 > 0.0);
    }

    #[test]
    fn spearman_ignores_monotone_maps(x in prop::collection::vec(-1e3f64..1e3, 3..60), seed in any::<u64>()) {
        let mut rng = dist::stream(seed, 4);
        let y: Vec<f64> = x.iter().map(|v| v + standard_normal(&mut rng)).collect();
        let fx: Vec<f64> = x.iter().map(|v| (v / 100.0).exp()).collect();
        let gy: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        if let (Ok(r1), Ok(r2)) = (spearman(&x, &y), spearman(&fx, &gy)) {
            prop_assert!((r1 - r2).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r1));
        }
        if let Ok(r) = spearman(&x, &x) {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
