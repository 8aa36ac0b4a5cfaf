//! Genetic-parameter algebra for the recursive model: moving covariance
//! matrices from the RFI scale to the intake scale, heritabilities and
//! genetic correlations.
//!
//! Trait index 0 is the intake (RFI) equation; indices `1..k` are sinks.
//! `lambda[t - 1]` is the effect of sink `t` on intake.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Unit upper-triangular structural matrix with `-lambda` in the first row.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMatrix {
    lambda: Vec<f64>,
}

impl StructuralMatrix {
    pub fn new(lambda: &[f64]) -> Self {
        Self { lambda: lambda.to_vec() }
    }

    pub fn k(&self) -> usize {
        self.lambda.len() + 1
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::identity(self.k());
        for (t, l) in self.lambda.iter().enumerate() {
            m[(0, t + 1)] = -l;
        }
        m
    }

    /// Closed-form inverse: the same layout with the signs flipped.
    pub fn inverse_matrix(&self) -> Matrix {
        StructuralMatrix::new(&self.lambda.iter().map(|l| -l).collect::<Vec<_>>()).to_matrix()
    }

    /// Always 1 (unit triangular); computed as the product of the diagonal.
    pub fn determinant(&self) -> f64 {
        self.to_matrix().diagonal().iter().product()
    }
}

fn check_square(m: &Matrix, k: usize) -> Result<()> {
    if m.rows() != k || m.cols() != k {
        return Err(Error::Dimension(format!("expected {k}x{k} covariance, got {}x{}", m.rows(), m.cols())));
    }
    Ok(())
}

/// `Lambda^{-1} M Lambda'^{-1}` by dense products, with `Lambda^{-1}`
/// obtained by elimination rather than the closed form.
pub fn transform_covariance(lambda: &StructuralMatrix, m: &Matrix) -> Result<Matrix> {
    check_square(m, lambda.k())?;
    let inv = lambda.to_matrix().inverse()?;
    let mut out = inv.matmul(m)?.matmul(&inv.transpose())?;
    out.symmetrize();
    if is_constrained(m, 0.0) {
        debug_assert!(transform_covariance_closed_form(lambda.lambda(), m)
            .map(|c| c.max_abs_diff(&out) <= 1e-10 * (1.0 + max_abs(m)))
            .unwrap_or(false));
    }
    Ok(out)
}

fn max_abs(m: &Matrix) -> f64 {
    m.as_slice().iter().fold(0.0, |a, v| f64::max(a, libm::fabs(*v)))
}

/// Whether the intake row/column of `m` is zero off the diagonal.
pub fn is_constrained(m: &Matrix, tol: f64) -> bool {
    (1..m.rows()).all(|j| libm::fabs(m[(0, j)]) <= tol && libm::fabs(m[(j, 0)]) <= tol)
}

/// `Delta = lambda' M_s lambda`, written as the squared-coefficient term
/// plus the cross terms over distinct sinks.
pub fn delta(lambda: &[f64], sink_block: &Matrix) -> f64 {
    let k1 = lambda.len();
    let mut squares = 0.0;
    let mut cross = 0.0;
    for tp in 0..k1 {
        squares += lambda[tp] * lambda[tp] * sink_block[(tp, tp)];
        let inner: f64 = (0..k1).filter(|&t| t != tp).map(|t| lambda[t] * sink_block[(t, tp)]).sum();
        cross += lambda[tp] * inner;
    }
    squares + cross
}

/// Covariance between intake and sink `tp` (0-based among sinks):
/// `lambda_tp sigma_tp^2 + sum_{t != tp} lambda_t sigma_{t,tp}`.
pub fn intake_sink_covariance(lambda: &[f64], sink_block: &Matrix, tp: usize) -> f64 {
    let own = lambda[tp] * sink_block[(tp, tp)];
    let rest: f64 = (0..lambda.len()).filter(|&t| t != tp).map(|t| lambda[t] * sink_block[(t, tp)]).sum();
    own + rest
}

/// Entry-wise formula for the transformed matrix when `m` has a zero
/// intake row/column apart from its diagonal.
pub fn transform_covariance_closed_form(lambda: &[f64], m: &Matrix) -> Result<Matrix> {
    let k = lambda.len() + 1;
    check_square(m, k)?;
    if !is_constrained(m, 0.0) {
        return Err(Error::Validation("closed form needs zero intake-sink covariances".into()));
    }
    let sinks: Vec<usize> = (1..k).collect();
    let block = m.submatrix(&sinks, &sinks);
    let mut out = m.clone();
    out[(0, 0)] = m[(0, 0)] + delta(lambda, &block);
    for tp in 0..k - 1 {
        let c = intake_sink_covariance(lambda, &block, tp);
        out[(0, tp + 1)] = c;
        out[(tp + 1, 0)] = c;
    }
    Ok(out)
}

pub fn heritability_rfi(sigma2_a: f64, sigma2_e: f64) -> Result<f64> {
    if sigma2_a < 0.0 || sigma2_e < 0.0 {
        return Err(Error::Validation(format!("negative variance ({sigma2_a}, {sigma2_e})")));
    }
    let total = sigma2_a + sigma2_e;
    if total == 0.0 {
        return Err(Error::Degenerate("heritability undefined: both variances are zero".into()));
    }
    Ok(sigma2_a / total)
}

pub fn heritability_dmi(sigma2_a: f64, sigma2_e: f64, delta_a: f64, delta_e: f64) -> Result<f64> {
    let g = sigma2_a + delta_a;
    let e = sigma2_e + delta_e;
    if g < 0.0 || e < 0.0 {
        return Err(Error::Validation(format!("negative intake-scale variance ({g}, {e})")));
    }
    if g + e == 0.0 {
        return Err(Error::Degenerate("intake heritability has zero denominator".into()));
    }
    Ok(g / (g + e))
}

/// Genetic correlation between intake and sink `tp` (0-based among sinks).
pub fn genetic_correlation_dmi_sink(lambda: &[f64], g_sink: &Matrix, sigma2_a1: f64, tp: usize) -> Result<f64> {
    let var_sink = g_sink[(tp, tp)];
    if !(var_sink > 0.0) {
        return Err(Error::Degenerate(format!("sink {tp} has zero genetic variance")));
    }
    let var_dmi = sigma2_a1 + delta(lambda, g_sink);
    if !(var_dmi > 0.0) {
        return Err(Error::Degenerate("intake genetic variance is zero".into()));
    }
    Ok(intake_sink_covariance(lambda, g_sink, tp) / libm::sqrt(var_dmi * var_sink))
}

/// Genetic correlation between intake and RFI: `sigma_a1^2` over the
/// geometric mean of the two genetic variances.
pub fn genetic_correlation_dmi_rfi(lambda: &[f64], g_sink: &Matrix, sigma2_a1: f64) -> Result<f64> {
    let var_dmi = sigma2_a1 + delta(lambda, g_sink);
    if !(var_dmi > 0.0 && sigma2_a1 > 0.0) {
        return Err(Error::Degenerate("zero genetic variance".into()));
    }
    Ok(sigma2_a1 / libm::sqrt(var_dmi * sigma2_a1))
}

pub fn correlation_matrix(cov: &Matrix) -> Result<Matrix> {
    let d = cov.diagonal();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Degenerate(format!("variance {i} is not positive")));
    }
    let s: Vec<f64> = d.iter().map(|v| libm::sqrt(*v)).collect();
    Ok(Matrix::from_fn(cov.rows(), cov.cols(), |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (s[i] * s[j])
        }
    }))
}

/// Heritabilities and correlations on the intake scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneticParameters {
    /// Intake, sinks..., RFI.
    pub heritability: Vec<f64>,
    /// Genetic correlations among intake and sinks (intake scale).
    pub correlation: Matrix,
    pub rg_dmi_rfi: f64,
    pub delta_a: f64,
    pub delta_e: f64,
}

/// Parameters implied by RFI-scale `G0`, `R0` satisfying the zero
/// intake-sink covariance constraint.
pub fn genetic_parameters(lambda: &[f64], g0: &Matrix, r0: &Matrix) -> Result<GeneticParameters> {
    let k = lambda.len() + 1;
    check_square(g0, k)?;
    check_square(r0, k)?;
    let sinks: Vec<usize> = (1..k).collect();
    let gs = g0.submatrix(&sinks, &sinks);
    let rs = r0.submatrix(&sinks, &sinks);
    let delta_a = delta(lambda, &gs);
    let delta_e = delta(lambda, &rs);
    let mut heritability = vec![heritability_dmi(g0[(0, 0)], r0[(0, 0)], delta_a, delta_e)?];
    for t in 1..k {
        heritability.push(heritability_rfi(g0[(t, t)], r0[(t, t)])?);
    }
    heritability.push(heritability_rfi(g0[(0, 0)], r0[(0, 0)])?);
    let gstar = transform_covariance(&StructuralMatrix::new(lambda), g0)?;
    Ok(GeneticParameters {
        heritability,
        correlation: correlation_matrix(&gstar)?,
        rg_dmi_rfi: genetic_correlation_dmi_rfi(lambda, &gs, g0[(0, 0)])?,
        delta_a,
        delta_e,
    })
}

/// Block-diagonal `diag(v0, block)`.
pub fn constrained_covariance(intake: f64, sink_block: &Matrix) -> Matrix {
    let k = sink_block.rows() + 1;
    let mut m = Matrix::zeros(k, k);
    m[(0, 0)] = intake;
    for i in 1..k {
        for j in 1..k {
            m[(i, j)] = sink_block[(i - 1, j - 1)];
        }
    }
    m
}
