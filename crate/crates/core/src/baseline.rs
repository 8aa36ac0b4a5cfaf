//! Closed-form regression baselines and the two-stage RFI fit.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{run_chains_sequential, ChainOutput};
use crate::data::{Design, EffectSet, ModelData, ModelFamily, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::pedigree::SparseSymmetric;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    /// Classical OLS standard errors.
    pub standard_errors: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Regression of `y[:, 0]` on the remaining columns, no intercept. The
/// residuals are the stage-one RFI phenotypes.
pub fn fit_stage1(y: &Matrix) -> Result<RegressionFit> {
    let (n, k) = (y.rows(), y.cols());
    if k < 2 {
        return Err(Error::Dimension("need an intake column and at least one sink".into()));
    }
    let p = k - 1;
    if n < p {
        return Err(Error::Validation(format!("{n} records cannot identify {p} coefficients")));
    }
    let sinks = y.select_columns(&(1..k).collect::<Vec<_>>());
    let dmi = y.column(0);
    let xtx = sinks.gram();
    let chol = xtx.cholesky().map_err(|_| Error::RankDeficient("sink cross-product matrix is singular".into()))?;
    let b = chol.solve(&sinks.transpose_matvec(&dmi));
    let residuals: Vec<f64> = (0..n).map(|i| dmi[i] - dot(sinks.row(i), &b)).collect();
    let standard_errors = if n > p {
        let s2 = dot(&residuals, &residuals) / (n - p) as f64;
        chol.inverse().diagonal().iter().map(|v| libm::sqrt(s2 * v)).collect()
    } else {
        vec![f64::NAN; p]
    };
    Ok(RegressionFit { coefficients: b, standard_errors, residuals })
}

/// Least-squares partial regression of location-adjusted intake `w` on the
/// sinks: `(X'X)^{-1} X'w`.
pub fn ls_partial_regression(w: &[f64], sinks: &Matrix) -> Result<Vec<f64>> {
    if w.len() != sinks.rows() {
        return Err(Error::Dimension("w and sink matrix differ in length".into()));
    }
    let chol = sinks
        .gram()
        .cholesky()
        .map_err(|_| Error::RankDeficient("sink cross-product matrix is singular".into()))?;
    Ok(chol.solve(&sinks.transpose_matvec(w)))
}

/// `V22^{-1} c12`.
pub fn phenotypic_partial_regression(c12: &[f64], v22: &Matrix) -> Result<Vec<f64>> {
    if v22.rows() != c12.len() || !v22.is_square() {
        return Err(Error::Dimension("c12 and V22 do not conform".into()));
    }
    if !v22.is_symmetric(1e-12) {
        return Err(Error::Validation("V22 is not symmetric".into()));
    }
    Ok(v22.cholesky()?.solve(c12))
}

/// Effects of the stage-two model: everything the one-step model fits
/// except the sinks.
pub fn stage2_spec(template: &ModelSpec) -> ModelSpec {
    let mut spec = template.clone();
    spec.family = ModelFamily::St;
    spec.effects = EffectSet { intercept: true, ..template.effects };
    spec.response_index = 0;
    spec
}

/// Single-trait data set holding the stage-one residuals as trait `rfi`.
/// `design` and `ainv` must describe the same records and animals as the
/// residuals.
pub fn stage2_data(
    residuals: &[f64],
    design: Design,
    ainv: Option<SparseSymmetric>,
    animal_ids: Vec<i64>,
) -> Result<ModelData> {
    if residuals.len() != design.n_records {
        return Err(Error::Dimension("residuals and design differ in length".into()));
    }
    Ok(ModelData {
        y: Matrix::from_row_slice(residuals.len(), 1, residuals),
        trait_names: vec![String::from("rfi")],
        design,
        ainv,
        animal_ids,
    })
}

/// Stage-two animal model on the stage-one residuals, all chains.
pub fn fit_stage2(
    residuals: &[f64],
    design: Design,
    ainv: Option<SparseSymmetric>,
    animal_ids: Vec<i64>,
    spec: &ModelSpec,
) -> Result<Vec<Result<ChainOutput>>> {
    let data = stage2_data(residuals, design, ainv, animal_ids)?;
    Ok(run_chains_sequential(&stage2_spec(spec), &data))
}
