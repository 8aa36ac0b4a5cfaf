//! Convergence and comparison statistics.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with denominator `n - 1`.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Gelman-Rubin shrink factor `sqrt(((L-1)/L W + B/L) / W)` for `m >= 2`
/// chains of common length `L >= 2`.
pub fn shrink_factor(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Validation("shrink factor needs at least two chains".into()));
    }
    let l = chains[0].len();
    if l < 2 || chains.iter().any(|c| c.len() != l) {
        return Err(Error::Validation("chains must share a length of at least 2".into()));
    }
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / chains.len() as f64;
    if !(w > 0.0) {
        return Err(Error::Degenerate("within-chain variance is zero".into()));
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let lf = l as f64;
    let b = lf * variance(&means);
    Ok(libm::sqrt(((lf - 1.0) / lf * w + b / lf) / w))
}

/// Shrink factor on prefixes of length `stride, 2 stride, ...` (and the
/// full length). Prefixes with zero within-chain variance are skipped.
pub fn sf_trajectory(chains: &[&[f64]], stride: usize) -> Result<Vec<(usize, f64)>> {
    if stride < 2 {
        return Err(Error::Validation("stride must be at least 2".into()));
    }
    let l = chains.first().map_or(0, |c| c.len());
    let mut ends: Vec<usize> = (1..).map(|i| i * stride).take_while(|&e| e <= l).collect();
    if ends.last() != Some(&l) && l >= 2 {
        ends.push(l);
    }
    let mut out = Vec::with_capacity(ends.len());
    for e in ends {
        let prefix: Vec<&[f64]> = chains.iter().map(|c| &c[..e]).collect();
        match shrink_factor(&prefix) {
            Ok(sf) => out.push((e, sf)),
            Err(Error::Degenerate(_)) => continue,
            Err(err) => return Err(err),
        }
    }
    Ok(out)
}

/// Ranks starting at 1, ties sharing their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Validation("correlation needs two equal-length vectors of length >= 2".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation undefined for a constant vector".into()));
    }
    Ok(sxy / libm::sqrt(sxx * syy))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Validation("correlation needs two equal-length vectors of length >= 2".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(samples: &[f64]) -> Result<Summary> {
    if samples.len() < 2 {
        return Err(Error::Validation("summary needs at least two samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: mean(samples),
        sd: libm::sqrt(variance(samples)),
        q025: quantile_sorted(&sorted, 0.025),
        median: quantile_sorted(&sorted, 0.5),
        q975: quantile_sorted(&sorted, 0.975),
    })
}
