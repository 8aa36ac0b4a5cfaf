//! Single-site Gibbs machinery for a block of `t` traits that share one
//! incidence structure: overall means and DIM classes (sampled jointly),
//! test-week effects, additive genetic effects, and the covariance matrices.
//!
//! Every location conditional is the normal implied by the mixed-model
//! equations with the ridge terms `R^{-1}`-weighted against
//! `omega^{-2} I` (fixed effects), `diag(sigma_tw^{-2})` (test weeks) and
//! `A^{-1} (x) G^{-1}` (animals). Residuals `y - fitted` are kept current so
//! each update is local.

use alloc::vec;
use alloc::vec::Vec;

use log::warn;
use rand::Rng;

use crate::data::Design;
use crate::dist;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::pedigree::SparseSymmetric;
use crate::rsem::PriorSpec;

/// Read-only incidence lookups derived from a [`Design`].
#[derive(Debug, Clone)]
pub struct Layout {
    pub n: usize,
    /// Fixed-effect columns (intercept first, then non-reference DIM classes).
    pub p: usize,
    pub intercept: bool,
    /// Fixed columns hit by each record.
    fixed_cols: Vec<[Option<usize>; 2]>,
    xtx: Matrix,
    tw_index: Option<Vec<usize>>,
    tw_members: Vec<Vec<usize>>,
    animal_index: Option<Vec<usize>>,
    animal_records: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(design: &Design) -> Self {
        let n = design.n_records;
        let p = design.fixed_columns();
        let offset = usize::from(design.intercept);
        let fixed_cols: Vec<[Option<usize>; 2]> = (0..n)
            .map(|i| [design.intercept.then_some(0), design.dim_column(i).map(|c| c + offset)])
            .collect();
        let mut xtx = Matrix::zeros(p, p);
        for cols in &fixed_cols {
            for a in cols.iter().flatten() {
                for b in cols.iter().flatten() {
                    xtx[(*a, *b)] += 1.0;
                }
            }
        }
        Self {
            n,
            p,
            intercept: design.intercept,
            fixed_cols,
            xtx,
            tw_index: design.test_week.as_ref().map(|f| f.index.clone()),
            tw_members: design.test_week.as_ref().map_or_else(Vec::new, |f| f.members()),
            animal_index: design.animal.clone(),
            animal_records: design.records_by_animal(),
        }
    }

    pub fn n_test_weeks(&self) -> usize {
        self.tw_members.len()
    }

    pub fn n_animals(&self) -> usize {
        self.animal_records.len()
    }

    pub fn has_test_week(&self) -> bool {
        self.tw_index.is_some()
    }

    pub fn has_animal(&self) -> bool {
        self.animal_index.is_some()
    }

    pub fn fixed_cols(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.fixed_cols[i].iter().flatten().copied()
    }

    pub fn animal_of(&self, i: usize) -> Option<usize> {
        self.animal_index.as_ref().map(|a| a[i])
    }

    pub fn test_week_of(&self, i: usize) -> Option<usize> {
        self.tw_index.as_ref().map(|a| a[i])
    }
}

/// Either a random draw or the conditional mean (for Gauss-Seidel solves).
pub(crate) fn draw_or_mean<R: Rng + ?Sized>(
    rng: &mut Option<&mut R>,
    mean: Vec<f64>,
    precision: &Cholesky,
    scale: f64,
) -> Vec<f64> {
    match rng {
        Some(r) => dist::normal_from_precision(*r, &mean, precision, scale),
        None => mean,
    }
}

/// Location effects and covariances for `t` traits.
#[derive(Debug, Clone)]
pub struct TraitBlock {
    t: usize,
    /// `p x t`, column-major over fixed columns: `fixed[c * t + s]`.
    pub fixed: Vec<f64>,
    pub test_week: Vec<f64>,
    pub animal: Vec<f64>,
    pub residual_cov: Matrix,
    pub genetic_cov: Matrix,
    pub test_week_var: Vec<f64>,
    resid: Vec<f64>,
}

impl TraitBlock {
    /// A block with all location effects at zero; `response` is `n x t`.
    pub fn new(layout: &Layout, response: &Matrix, residual_cov: Matrix, genetic_cov: Matrix, test_week_var: Vec<f64>) -> Self {
        let t = response.cols();
        assert_eq!(response.rows(), layout.n);
        Self {
            t,
            fixed: vec![0.0; layout.p * t],
            test_week: vec![0.0; layout.n_test_weeks() * t],
            animal: vec![0.0; layout.n_animals() * t],
            residual_cov,
            genetic_cov,
            test_week_var,
            resid: response.as_slice().to_vec(),
        }
    }

    pub fn traits(&self) -> usize {
        self.t
    }

    /// `y - fitted` for record `i`.
    pub fn residual(&self, i: usize) -> &[f64] {
        &self.resid[i * self.t..(i + 1) * self.t]
    }

    pub fn residuals(&self) -> &[f64] {
        &self.resid
    }

    /// Adds `delta` to the response (and so the residual) of record `i`,
    /// trait `s`.
    #[inline]
    pub fn shift_response(&mut self, i: usize, s: usize, delta: f64) {
        self.resid[i * self.t + s] += delta;
    }

    /// Fitted location (everything except the residual) of record `i`.
    pub fn fitted(&self, layout: &Layout, i: usize) -> Vec<f64> {
        let t = self.t;
        let mut f = vec![0.0; t];
        for c in layout.fixed_cols(i) {
            for s in 0..t {
                f[s] += self.fixed[c * t + s];
            }
        }
        if let Some(l) = layout.test_week_of(i) {
            for s in 0..t {
                f[s] += self.test_week[l * t + s];
            }
        }
        if let Some(j) = layout.animal_of(i) {
            for s in 0..t {
                f[s] += self.animal[j * t + s];
            }
        }
        f
    }

    pub fn animal_values(&self, j: usize) -> &[f64] {
        &self.animal[j * self.t..(j + 1) * self.t]
    }

    fn residual_precision(&self) -> Result<Matrix> {
        Ok(self.residual_cov.cholesky()?.inverse())
    }

    /// Joint conditional of the fixed effects (intercept and DIM classes)
    /// for all traits: returns the mean and the Cholesky factor of the
    /// precision.
    pub fn fixed_conditional(&self, layout: &Layout, prior: &PriorSpec) -> Result<(Vec<f64>, Cholesky)> {
        let (p, t) = (layout.p, self.t);
        let rinv = self.residual_precision()?;
        let dim = p * t;
        let mut prec = Matrix::zeros(dim, dim);
        for a in 0..p {
            for b in 0..p {
                let x = layout.xtx[(a, b)];
                if x == 0.0 {
                    continue;
                }
                for s in 0..t {
                    for u in 0..t {
                        prec[(a * t + s, b * t + u)] = x * rinv[(s, u)];
                    }
                }
            }
        }
        let mut rhs = vec![0.0; dim];
        let mut r = vec![0.0; t];
        for i in 0..layout.n {
            r.copy_from_slice(self.residual(i));
            for c in layout.fixed_cols(i) {
                for s in 0..t {
                    r[s] += self.fixed[c * t + s];
                }
            }
            let z = rinv.matvec(&r);
            for c in layout.fixed_cols(i) {
                for s in 0..t {
                    rhs[c * t + s] += z[s];
                }
            }
        }
        for c in 0..p {
            let is_mean = layout.intercept && c == 0;
            let (prior_prec, prior_mean) = if is_mean {
                (prior.mu_variance.map_or(0.0, |v| 1.0 / v), 0.0)
            } else {
                (1.0 / prior.omega2, prior.beta0)
            };
            for s in 0..t {
                prec[(c * t + s, c * t + s)] += prior_prec;
                rhs[c * t + s] += prior_prec * prior_mean;
            }
        }
        let chol = prec.cholesky()?;
        let mean = chol.solve(&rhs);
        Ok((mean, chol))
    }

    pub fn sample_fixed<R: Rng + ?Sized>(&mut self, layout: &Layout, prior: &PriorSpec, mut rng: Option<&mut R>) -> Result<()> {
        if layout.p == 0 {
            return Ok(());
        }
        let (mean, chol) = self.fixed_conditional(layout, prior)?;
        let new = draw_or_mean(&mut rng, mean, &chol, 1.0);
        let t = self.t;
        let delta: Vec<f64> = new.iter().zip(&self.fixed).map(|(a, b)| a - b).collect();
        for i in 0..layout.n {
            for c in layout.fixed_cols(i) {
                for s in 0..t {
                    self.resid[i * t + s] -= delta[c * t + s];
                }
            }
        }
        self.fixed = new;
        Ok(())
    }

    pub fn sample_test_weeks<R: Rng + ?Sized>(&mut self, layout: &Layout, mut rng: Option<&mut R>) -> Result<()> {
        if !layout.has_test_week() {
            return Ok(());
        }
        let t = self.t;
        let rinv = self.residual_precision()?;
        let mut sum = vec![0.0; t];
        for (l, members) in layout.tw_members.iter().enumerate() {
            let mut prec = rinv.scale(members.len() as f64);
            for s in 0..t {
                prec[(s, s)] += 1.0 / self.test_week_var[s];
            }
            sum.iter_mut().for_each(|v| *v = 0.0);
            let old = &self.test_week[l * t..(l + 1) * t];
            for &i in members {
                for s in 0..t {
                    sum[s] += self.resid[i * t + s] + old[s];
                }
            }
            let rhs = rinv.matvec(&sum);
            let chol = prec.cholesky()?;
            let new = draw_or_mean(&mut rng, chol.solve(&rhs), &chol, 1.0);
            for &i in members {
                for s in 0..t {
                    self.resid[i * t + s] -= new[s] - self.test_week[l * t + s];
                }
            }
            self.test_week[l * t..(l + 1) * t].copy_from_slice(&new);
        }
        Ok(())
    }

    pub fn sample_animals<R: Rng + ?Sized>(&mut self, layout: &Layout, ainv: &SparseSymmetric, mut rng: Option<&mut R>) -> Result<()> {
        if !layout.has_animal() {
            return Ok(());
        }
        let t = self.t;
        let rinv = self.residual_precision()?;
        let ginv = self.genetic_cov.cholesky()?.inverse();
        let mut own = vec![0.0; t];
        let mut nbr = vec![0.0; t];
        for j in 0..layout.n_animals() {
            let records = &layout.animal_records[j];
            let mut diag = 0.0;
            nbr.iter_mut().for_each(|v| *v = 0.0);
            for &(k, v) in ainv.row(j) {
                if k == j {
                    diag = v;
                } else {
                    for s in 0..t {
                        nbr[s] += v * self.animal[k * t + s];
                    }
                }
            }
            let mut prec = ginv.scale(diag);
            own.iter_mut().for_each(|v| *v = 0.0);
            if !records.is_empty() {
                let m = records.len() as f64;
                for s in 0..t {
                    for u in 0..t {
                        prec[(s, u)] += m * rinv[(s, u)];
                    }
                }
                for &i in records {
                    for s in 0..t {
                        own[s] += self.resid[i * t + s] + self.animal[j * t + s];
                    }
                }
            }
            let data_part = rinv.matvec(&own);
            let prior_part = ginv.matvec(&nbr);
            let rhs: Vec<f64> = data_part.iter().zip(&prior_part).map(|(a, b)| a - b).collect();
            let chol = prec.cholesky()?;
            let new = draw_or_mean(&mut rng, chol.solve(&rhs), &chol, 1.0);
            for &i in records {
                for s in 0..t {
                    self.resid[i * t + s] -= new[s] - self.animal[j * t + s];
                }
            }
            self.animal[j * t..(j + 1) * t].copy_from_slice(&new);
        }
        Ok(())
    }

    /// One pass over all location effects.
    pub fn sample_locations<R: Rng + ?Sized>(
        &mut self,
        layout: &Layout,
        ainv: Option<&SparseSymmetric>,
        prior: &PriorSpec,
        rng: &mut R,
    ) -> Result<()> {
        self.sample_fixed(layout, prior, Some(&mut *rng))?;
        self.sample_test_weeks(layout, Some(&mut *rng))?;
        if let Some(ainv) = ainv {
            self.sample_animals(layout, ainv, Some(&mut *rng))?;
        }
        Ok(())
    }

    /// Gauss-Seidel pass: every location set to its conditional mean.
    pub fn solve_locations_step(&mut self, layout: &Layout, ainv: Option<&SparseSymmetric>, prior: &PriorSpec) -> Result<()> {
        self.sample_fixed::<dist::ChainRng>(layout, prior, None)?;
        self.sample_test_weeks::<dist::ChainRng>(layout, None)?;
        if let Some(ainv) = ainv {
            self.sample_animals::<dist::ChainRng>(layout, ainv, None)?;
        }
        Ok(())
    }

    /// Residual cross-product `E'E`.
    pub fn residual_crossproduct(&self) -> Matrix {
        Matrix::from_row_slice(self.resid.len() / self.t, self.t, &self.resid).gram()
    }

    /// `a' A^{-1} a` as a `t x t` matrix.
    pub fn genetic_crossproduct(&self, ainv: &SparseSymmetric) -> Matrix {
        let q = self.animal.len() / self.t;
        ainv.quadratic_form(&Matrix::from_row_slice(q, self.t, &self.animal))
    }

    pub fn sample_covariances<R: Rng + ?Sized>(
        &mut self,
        layout: &Layout,
        ainv: Option<&SparseSymmetric>,
        prior: &PriorSpec,
        rng: &mut R,
    ) -> Result<()> {
        let ee = self.residual_crossproduct();
        self.residual_cov = draw_covariance(rng, prior, &ee, layout.n, "residual")?;
        if let Some(ainv) = ainv {
            let aa = self.genetic_crossproduct(ainv);
            self.genetic_cov = draw_covariance(rng, prior, &aa, layout.n_animals(), "genetic")?;
        }
        if layout.has_test_week() {
            let m = layout.n_test_weeks();
            for s in 0..self.t {
                let uu: f64 = (0..m).map(|l| self.test_week[l * self.t + s]).map(|u| u * u).sum();
                self.test_week_var[s] = draw_scalar_variance(rng, prior, uu, m, "test-week")?;
            }
        }
        Ok(())
    }
}

/// Scaled inverse chi-square conditional with `nu0 s0^2` prior.
pub fn draw_scalar_variance<R: Rng + ?Sized>(rng: &mut R, prior: &PriorSpec, sum_sq: f64, count: usize, what: &str) -> Result<f64> {
    let df = prior.scalar_df + count as f64;
    let scale = sum_sq + prior.scalar_df * prior.scalar_scale;
    let v = dist::scaled_inv_chi_squared(rng, df, scale.max(0.0))?;
    Ok(apply_floor(v, prior.variance_floor, what))
}

pub(crate) fn apply_floor(v: f64, floor: f64, what: &str) -> f64 {
    if v < floor || v.is_nan() {
        warn!("{what} variance draw {v:e} below floor; clamped to {floor:e}");
        floor
    } else {
        v
    }
}

/// Scalar prior for 1x1 blocks, inverse Wishart otherwise.
pub fn draw_covariance<R: Rng + ?Sized>(rng: &mut R, prior: &PriorSpec, crossprod: &Matrix, count: usize, what: &str) -> Result<Matrix> {
    let t = crossprod.rows();
    if t == 1 {
        let v = draw_scalar_variance(rng, prior, crossprod[(0, 0)], count, what)?;
        return Ok(Matrix::from_diagonal(&[v]));
    }
    let df = t as f64 + prior.block_df_extra + count as f64;
    let scale = Matrix::identity(t).scale(prior.block_scale).add(crossprod);
    // A non-positive-definite draw is rejected and redrawn once.
    for _ in 0..2 {
        let mut draw = dist::inverse_wishart(rng, df, &scale)?;
        for s in 0..t {
            if draw[(s, s)] < prior.variance_floor {
                warn!("{what} covariance diagonal {s} below floor; clamped");
                draw[(s, s)] = prior.variance_floor;
            }
        }
        if draw.cholesky().is_ok() {
            return Ok(draw);
        }
        warn!("{what} covariance draw not positive definite");
    }
    Err(Error::NotPositiveDefinite(alloc::format!("{what} covariance draw")))
}
