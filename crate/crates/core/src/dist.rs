//! Random draws used by the Gibbs samplers.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};

/// Per-chain random stream. ChaCha is portable across platforms, so a seed
/// fully determines a chain.
pub type ChainRng = ChaCha8Rng;

/// Independent stream `stream` derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn chi_squared<R: Rng + ?Sized>(rng: &mut R, df: f64) -> Result<f64> {
    let d = ChiSquared::new(df)
        .map_err(|_| Error::Degenerate(format!("chi-square degrees of freedom {df}")))?;
    Ok(d.sample(rng))
}

/// Scaled inverse chi-square draw: `scale_sum / chi2(df)`, where
/// `scale_sum = df * s^2` in the usual parameterization.
pub fn scaled_inv_chi_squared<R: Rng + ?Sized>(rng: &mut R, df: f64, scale_sum: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::Degenerate(format!(
            "scaled inverse chi-square needs positive degrees of freedom, got {df}"
        )));
    }
    Ok(scale_sum / chi_squared(rng, df)?)
}

/// Draws `mean + L^{-T} z * sqrt(scale)` where `precision = L L'`; i.e. a
/// normal vector with covariance `scale * precision^{-1}`.
pub fn normal_from_precision<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &[f64],
    precision: &Cholesky,
    scale: f64,
) -> Vec<f64> {
    let z: Vec<f64> = (0..mean.len()).map(|_| standard_normal(rng)).collect();
    let dev = precision.solve_upper(&z);
    let s = libm::sqrt(scale);
    mean.iter().zip(dev).map(|(m, d)| m + s * d).collect()
}

/// Draws `L z` for a covariance with lower factor `L`.
pub fn correlated_normal<R: Rng + ?Sized>(rng: &mut R, cov_factor: &Cholesky) -> Vec<f64> {
    let n = cov_factor.dim();
    let z: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
    let l = cov_factor.l();
    (0..n).map(|i| (0..=i).map(|k| l[(i, k)] * z[k]).sum()).collect()
}

/// Wishart draw with `df` degrees of freedom and scale matrix `scale`, via the
/// Bartlett decomposition.
pub fn wishart<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: &Matrix) -> Result<Matrix> {
    let p = scale.rows();
    if !(df > (p as f64) - 1.0) {
        return Err(Error::Degenerate(format!("Wishart df {df} too small for dimension {p}")));
    }
    let l = scale.cholesky()?;
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        a[(i, i)] = libm::sqrt(chi_squared(rng, df - i as f64)?);
        for j in 0..i {
            a[(i, j)] = standard_normal(rng);
        }
    }
    let la = l.l().matmul(&a)?;
    let mut w = la.matmul(&la.transpose())?;
    w.symmetrize();
    Ok(w)
}

/// Inverse-Wishart draw: `W^{-1}` with `W ~ Wishart(df, scale^{-1})`, so the
/// mean is `scale / (df - p - 1)`.
pub fn inverse_wishart<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: &Matrix) -> Result<Matrix> {
    let scale_inv = scale.cholesky()?.inverse();
    let w = wishart(rng, df, &scale_inv)?;
    Ok(w.cholesky()?.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_inverse_chi_square_mean() {
        // E[S / chi2(v)] = S / (v - 2)
        let mut rng = stream(7, 0);
        let (df, s) = (20.0, 36.0);
        let n = 200_000;
        let mean = (0..n).map(|_| scaled_inv_chi_squared(&mut rng, df, s).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - s / (df - 2.0)).abs() < 0.02, "{mean}");
    }

    #[test]
    fn inverse_wishart_mean() {
        let mut rng = stream(11, 0);
        let scale = Matrix::from_rows(&[&[2.0, 0.4], &[0.4, 1.0]]);
        let df = 12.0;
        let n = 40_000;
        let mut acc = Matrix::zeros(2, 2);
        for _ in 0..n {
            acc = acc.add(&inverse_wishart(&mut rng, df, &scale).unwrap());
        }
        let mean = acc.scale(1.0 / n as f64);
        let expect = scale.scale(1.0 / (df - 3.0));
        assert!(mean.max_abs_diff(&expect) < 0.01, "{mean:?}");
    }

    #[test]
    fn normal_from_precision_covariance() {
        let prec = Matrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let chol = prec.cholesky().unwrap();
        let cov = chol.inverse();
        let mut rng = stream(3, 0);
        let n = 100_000;
        let mut s = Matrix::zeros(2, 2);
        for _ in 0..n {
            let x = normal_from_precision(&mut rng, &[0.0, 0.0], &chol, 1.0);
            for i in 0..2 {
                for j in 0..2 {
                    s[(i, j)] += x[i] * x[j] / n as f64;
                }
            }
        }
        assert!(s.max_abs_diff(&cov) < 0.01);
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: Vec<u64> = (0..4).map({ let mut r = stream(1, 0); move |_| r.random() }).collect();
        let b: Vec<u64> = (0..4).map({ let mut r = stream(1, 0); move |_| r.random() }).collect();
        let c: Vec<u64> = (0..4).map({ let mut r = stream(1, 1); move |_| r.random() }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
