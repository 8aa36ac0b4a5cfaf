//! Gibbs sampler for the recursive structural equation model.
//!
//! The intake equation is `y1 - sum_t lambda_t y_t = location + e1`; each
//! sink follows its own mixed model. Because the RFI-sink genetic and
//! residual covariances are fixed at zero, the conditionals for `lambda` and
//! for everything in the intake equation only involve that equation. The
//! sampler exploits this by keeping the intake equation and the sink block
//! in separate [`TraitBlock`]s, each with its own random stream.
//!
//! Sweep order per iteration: `lambda`, locations (intake then sinks),
//! variances.
//!
//! One-step linear regression (LR2, LR3) is the same intake equation with
//! the sinks treated as fixed covariates (`beta0`, `omega2` prior) and no
//! sink equations.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::GibbsSampler;
use crate::data::{ModelData, ModelFamily, ModelSpec};
use crate::dist::{self, ChainRng};
use crate::error::{Error, Result};
use crate::genetics;
use crate::linalg::{Cholesky, Matrix};
use crate::mme::{Layout, TraitBlock};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    /// Prior mean of every structural coefficient.
    pub lambda0: f64,
    /// Prior variance of the structural coefficients.
    pub tau2: f64,
    /// Prior mean of fixed effects (and of LR sink coefficients).
    pub beta0: f64,
    pub omega2: f64,
    /// Prior variance of the overall mean; `None` is flat.
    pub mu_variance: Option<f64>,
    /// `nu0` of the scaled inverse chi-square prior on scalar variances.
    pub scalar_df: f64,
    /// `s0^2` of the scaled inverse chi-square prior.
    pub scalar_scale: f64,
    /// Inverse-Wishart degrees of freedom in excess of the dimension.
    pub block_df_extra: f64,
    /// Inverse-Wishart scale matrix is `block_scale * I`.
    pub block_scale: f64,
    pub variance_floor: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            lambda0: 0.0,
            tau2: 1e6,
            beta0: 0.0,
            omega2: 1e6,
            mu_variance: None,
            scalar_df: -2.0,
            scalar_scale: 0.0,
            block_df_extra: 2.0,
            block_scale: 0.01,
            variance_floor: 1e-8,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau2 > 0.0) || !(self.omega2 > 0.0) {
            return Err(Error::Validation("tau2 and omega2 must be positive".into()));
        }
        if let Some(v) = self.mu_variance {
            if !(v > 0.0) {
                return Err(Error::Validation("mu_variance must be positive".into()));
            }
        }
        if !(self.block_scale > 0.0) || self.block_df_extra <= -1.0 {
            return Err(Error::Validation("inverse-Wishart prior must be proper".into()));
        }
        if self.scalar_scale < 0.0 || !(self.variance_floor > 0.0) {
            return Err(Error::Validation("variance prior scale and floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// Normal conditional of a vector of structural (or regression)
/// coefficients: mean `C^{-1} (X'w + k lambda0 1)` and covariance
/// `sigma2_e C^{-1}` with `C = X'X + k I`, `k = sigma2_e / tau2`.
#[derive(Debug, Clone)]
pub struct StructuralConditional {
    pub mean: Vec<f64>,
    chol: Cholesky,
    sigma2_e: f64,
}

impl StructuralConditional {
    pub fn new(cross: &Matrix, xw: &[f64], sigma2_e: f64, tau2: f64, lambda0: f64) -> Result<Self> {
        let ridge = sigma2_e / tau2;
        let mut c = cross.clone();
        for j in 0..c.rows() {
            c[(j, j)] += ridge;
        }
        let rhs: Vec<f64> = xw.iter().map(|v| v + ridge * lambda0).collect();
        let chol = c.cholesky()?;
        Ok(Self {
            mean: chol.solve(&rhs),
            chol,
            sigma2_e,
        })
    }

    pub fn covariance(&self) -> Matrix {
        self.chol.inverse().scale(self.sigma2_e)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        dist::normal_from_precision(rng, &self.mean, &self.chol, self.sigma2_e)
    }
}

/// Conditional of `lambda` given the location-adjusted intake
/// `w_i = y_i1 - (mu_1 + x_i'beta_1 + z_i'a_1)`.
pub fn lambda_conditional(sinks: &Matrix, w: &[f64], sigma2_e: f64, prior: &PriorSpec) -> Result<StructuralConditional> {
    StructuralConditional::new(&sinks.gram(), &sinks.transpose_matvec(w), sigma2_e, prior.tau2, prior.lambda0)
}

/// Random starting values: uniform on `[lo, hi)`.
pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub(crate) fn column_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).max(1e-6)
}

/// Diagonal starting covariance with entries drawn around the phenotypic
/// variances.
pub(crate) fn random_start_cov<R: Rng + ?Sized>(rng: &mut R, variances: &[f64]) -> Matrix {
    let d: Vec<f64> = variances.iter().map(|v| v * uniform(rng, 0.1, 0.9)).collect();
    Matrix::from_diagonal(&d)
}

/// Streams used by each sampler block.
pub(crate) const STREAM_INIT: u64 = 0;
pub(crate) const STREAM_INTAKE: u64 = 1;
pub(crate) const STREAM_SINKS: u64 = 2;

pub struct RsemSampler<'a> {
    data: &'a ModelData,
    spec: &'a ModelSpec,
    layout: Layout,
    sinks: Matrix,
    sink_cross: Matrix,
    /// Structural coefficients (or LR sink coefficients).
    pub lambda: Vec<f64>,
    pub intake: TraitBlock,
    pub sink_block: Option<TraitBlock>,
    coef_prior: (f64, f64),
    intake_rng: ChainRng,
    sink_rng: ChainRng,
    iteration: usize,
}

impl<'a> RsemSampler<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a ModelData, seed: u64) -> Result<Self> {
        use ModelFamily::*;
        let with_sinks = match spec.family {
            Rsem1 | Rsem2 | Rsem3 => true,
            Lr2 | Lr3 => false,
            other => return Err(Error::Validation(format!("{other} is not a recursive-model family"))),
        };
        if data.n_traits() < 2 {
            return Err(Error::Validation("recursive model needs at least one sink".into()));
        }
        let layout = Layout::new(&data.design);
        let k = data.n_traits();
        let sink_cols: Vec<usize> = (1..k).collect();
        let sinks = data.y.select_columns(&sink_cols);
        let sink_cross = sinks.gram();
        let coef_prior = if with_sinks {
            (spec.priors.lambda0, spec.priors.tau2)
        } else {
            (spec.priors.beta0, spec.priors.omega2)
        };

        let mut init = dist::stream(seed, STREAM_INIT);
        let lambda: Vec<f64> = (1..k).map(|_| uniform(&mut init, -1.0, 1.0)).collect();
        let y1 = data.y.column(0);
        let ystar: Vec<f64> = (0..data.n_records())
            .map(|i| y1[i] - sinks.row(i).iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let v1 = column_variance(&ystar);
        let intake = TraitBlock::new(
            &layout,
            &Matrix::from_row_slice(ystar.len(), 1, &ystar),
            random_start_cov(&mut init, &[v1]),
            random_start_cov(&mut init, &[v1]),
            vec![v1 * uniform(&mut init, 0.05, 0.5)],
        );
        let sink_block = with_sinks.then(|| {
            let vars: Vec<f64> = sink_cols.iter().map(|&j| column_variance(&data.y.column(j))).collect();
            let r = random_start_cov(&mut init, &vars);
            let g = random_start_cov(&mut init, &vars);
            let tw = vars.iter().map(|v| v * uniform(&mut init, 0.05, 0.5)).collect();
            TraitBlock::new(&layout, &sinks, r, g, tw)
        });
        Ok(Self {
            data,
            spec,
            layout,
            sinks,
            sink_cross,
            lambda,
            intake,
            sink_block,
            coef_prior,
            intake_rng: dist::stream(seed, STREAM_INTAKE),
            sink_rng: dist::stream(seed, STREAM_SINKS),
            iteration: 0,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn sigma2_e(&self) -> f64 {
        self.intake.residual_cov[(0, 0)]
    }

    /// `w_i = y_i1 - (mu_1 + x_i'beta_1 + z_i'a_1)` at the current state.
    pub fn adjusted_intake(&self) -> Vec<f64> {
        (0..self.layout.n)
            .map(|i| self.intake.residual(i)[0] + crate::linalg::dot(self.sinks.row(i), &self.lambda))
            .collect()
    }

    /// Conditional of `lambda` given everything else.
    pub fn lambda_conditional(&self) -> Result<StructuralConditional> {
        let w = self.adjusted_intake();
        let xw = self.sinks.transpose_matvec(&w);
        let (l0, tau2) = self.coef_prior;
        StructuralConditional::new(&self.sink_cross, &xw, self.sigma2_e(), tau2, l0)
    }

    /// Overwrites the sink covariances; used to check that the intake
    /// equation's conditionals do not depend on them.
    pub fn set_sink_covariances(&mut self, residual: Matrix, genetic: Matrix) {
        if let Some(b) = self.sink_block.as_mut() {
            b.residual_cov = residual;
            b.genetic_cov = genetic;
        }
    }

    /// Swaps in new phenotypes (`n x k`, model trait order) while keeping
    /// every parameter at its current value.
    pub fn replace_phenotypes(&mut self, y: &Matrix) -> Result<()> {
        let k = self.sinks.cols() + 1;
        if y.rows() != self.layout.n || y.cols() != k {
            return Err(Error::Dimension(format!(
                "expected {}x{k} phenotypes, got {}x{}",
                self.layout.n,
                y.rows(),
                y.cols()
            )));
        }
        let sink_cols: Vec<usize> = (1..k).collect();
        let sinks = y.select_columns(&sink_cols);
        for i in 0..self.layout.n {
            let old = self.intake.residual(i)[0] + self.intake.fitted(&self.layout, i)[0];
            let new = y[(i, 0)] - crate::linalg::dot(sinks.row(i), &self.lambda);
            self.intake.shift_response(i, 0, new - old);
            if let Some(b) = self.sink_block.as_mut() {
                let fitted = b.fitted(&self.layout, i);
                for s in 0..k - 1 {
                    let old = b.residual(i)[s] + fitted[s];
                    b.shift_response(i, s, sinks[(i, s)] - old);
                }
            }
        }
        self.sink_cross = sinks.gram();
        self.sinks = sinks;
        Ok(())
    }

    pub fn sample_lambda(&mut self) -> Result<()> {
        let cond = self.lambda_conditional()?;
        let new = cond.draw(&mut self.intake_rng);
        for i in 0..self.layout.n {
            let delta: f64 = self
                .sinks
                .row(i)
                .iter()
                .zip(new.iter().zip(&self.lambda))
                .map(|(x, (a, b))| x * (a - b))
                .sum();
            self.intake.shift_response(i, 0, -delta);
        }
        self.lambda = new;
        Ok(())
    }

    pub fn sample_locations(&mut self) -> Result<()> {
        let ainv = self.data.ainv.as_ref();
        let prior = &self.spec.priors;
        self.intake.sample_locations(&self.layout, ainv, prior, &mut self.intake_rng)?;
        if let Some(b) = self.sink_block.as_mut() {
            b.sample_locations(&self.layout, ainv, prior, &mut self.sink_rng)?;
        }
        Ok(())
    }

    pub fn sample_variances(&mut self) -> Result<()> {
        let ainv = self.data.ainv.as_ref();
        let prior = &self.spec.priors;
        self.intake.sample_covariances(&self.layout, ainv, prior, &mut self.intake_rng)?;
        if let Some(b) = self.sink_block.as_mut() {
            b.sample_covariances(&self.layout, ainv, prior, &mut self.sink_rng)?;
        }
        Ok(())
    }

    fn has_animal(&self) -> bool {
        self.data.ainv.is_some() && self.layout.has_animal()
    }

    fn sink_names(&self) -> &[String] {
        &self.data.trait_names[1..]
    }

    /// RFI-scale `G0`, `R0` (intake-sink entries zero).
    pub fn covariance_components(&self) -> Option<(Matrix, Matrix)> {
        let b = self.sink_block.as_ref()?;
        Some((
            genetics::constrained_covariance(self.intake.genetic_cov[(0, 0)], &b.genetic_cov),
            genetics::constrained_covariance(self.intake.residual_cov[(0, 0)], &b.residual_cov),
        ))
    }
}

pub(crate) fn push_matrix_names(names: &mut Vec<String>, prefix: &str, traits: &[String]) {
    for a in 0..traits.len() {
        for b in a..traits.len() {
            names.push(format!("{prefix}.{}_{}", traits[a], traits[b]));
        }
    }
}

pub(crate) fn push_matrix_values(out: &mut Vec<f64>, m: &Matrix) {
    for a in 0..m.rows() {
        for b in a..m.cols() {
            out.push(m[(a, b)]);
        }
    }
}

impl GibbsSampler for RsemSampler<'_> {
    fn param_names(&self) -> Vec<String> {
        let sinks = self.sink_names();
        let rfi = "rfi".to_string();
        let mut n: Vec<String> = sinks.iter().map(|s| format!("lambda.{s}")).collect();
        if self.layout.intercept {
            n.push(format!("mu.{rfi}"));
        }
        n.push(format!("sigma2_e.{rfi}"));
        if self.has_animal() {
            n.push(format!("sigma2_a.{rfi}"));
        }
        if self.layout.has_test_week() {
            n.push(format!("sigma2_tw.{rfi}"));
        }
        if self.sink_block.is_some() {
            push_matrix_names(&mut n, "R", sinks);
            if self.has_animal() {
                push_matrix_names(&mut n, "G", sinks);
            }
            if self.layout.has_test_week() {
                n.extend(sinks.iter().map(|s| format!("sigma2_tw.{s}")));
            }
        }
        if self.has_animal() {
            n.push(format!("h2.{rfi}"));
            if self.sink_block.is_some() {
                let dmi = &self.data.trait_names[0];
                n.push(format!("h2.{dmi}"));
                n.extend(sinks.iter().map(|s| format!("h2.{s}")));
                n.extend(sinks.iter().map(|s| format!("rg.{dmi}_{s}")));
                n.push(format!("rg.{dmi}_{rfi}"));
                for a in 0..sinks.len() {
                    for b in a + 1..sinks.len() {
                        n.push(format!("rg.{}_{}", sinks[a], sinks[b]));
                    }
                }
            }
            if self.layout.has_test_week() {
                n.push(format!("h2_tw.{rfi}"));
                if self.sink_block.is_some() {
                    n.push(format!("h2_tw.{}", self.data.trait_names[0]));
                    n.extend(sinks.iter().map(|s| format!("h2_tw.{s}")));
                }
            }
        }
        n
    }

    fn record_params(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend(&self.lambda);
        if self.layout.intercept {
            out.push(self.intake.fixed[0]);
        }
        let se = self.intake.residual_cov[(0, 0)];
        let sa = self.intake.genetic_cov[(0, 0)];
        out.push(se);
        if self.has_animal() {
            out.push(sa);
        }
        if self.layout.has_test_week() {
            out.push(self.intake.test_week_var[0]);
        }
        if let Some(b) = &self.sink_block {
            push_matrix_values(out, &b.residual_cov);
            if self.has_animal() {
                push_matrix_values(out, &b.genetic_cov);
            }
            if self.layout.has_test_week() {
                out.extend(&b.test_week_var);
            }
        }
        if self.has_animal() {
            out.push(sa / (sa + se));
            if let Some(b) = &self.sink_block {
                let nan = f64::NAN;
                let (g, r) = (&b.genetic_cov, &b.residual_cov);
                let da = genetics::delta(&self.lambda, g);
                let de = genetics::delta(&self.lambda, r);
                out.push(genetics::heritability_dmi(sa, se, da, de).unwrap_or(nan));
                for t in 0..g.rows() {
                    out.push(g[(t, t)] / (g[(t, t)] + r[(t, t)]));
                }
                for t in 0..g.rows() {
                    out.push(genetics::genetic_correlation_dmi_sink(&self.lambda, g, sa, t).unwrap_or(nan));
                }
                out.push(genetics::genetic_correlation_dmi_rfi(&self.lambda, g, sa).unwrap_or(nan));
                for a in 0..g.rows() {
                    for c in a + 1..g.rows() {
                        out.push(g[(a, c)] / libm::sqrt(g[(a, a)] * g[(c, c)]));
                    }
                }
            }
            if self.layout.has_test_week() {
                let tw = self.intake.test_week_var[0];
                out.push(sa / (sa + se + tw));
                if let Some(b) = &self.sink_block {
                    let (g, r, tws) = (&b.genetic_cov, &b.residual_cov, &b.test_week_var);
                    let da = genetics::delta(&self.lambda, g);
                    let de = genetics::delta(&self.lambda, r);
                    let dtw: f64 = self.lambda.iter().zip(tws).map(|(l, v)| l * l * v).sum();
                    out.push(genetics::heritability_dmi(sa, se + tw, da, de + dtw).unwrap_or(f64::NAN));
                    for t in 0..g.rows() {
                        out.push(g[(t, t)] / (g[(t, t)] + r[(t, t)] + tws[t]));
                    }
                }
            }
        }
    }

    fn sweep(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        self.sample_lambda().map_err(|e| e.at(it, "structural coefficients"))?;
        self.sample_locations().map_err(|e| e.at(it, "location effects"))?;
        self.sample_variances().map_err(|e| e.at(it, "variance components"))?;
        Ok(())
    }

    fn genetic_value_names(&self) -> Vec<String> {
        if !self.has_animal() {
            return Vec::new();
        }
        let mut n = vec!["rfi".to_string()];
        if self.sink_block.is_some() {
            n.push(self.data.trait_names[0].clone());
            n.extend(self.sink_names().iter().cloned());
        }
        n
    }

    fn record_genetic_values(&self, out: &mut [f64]) {
        let w = self.genetic_value_names().len();
        if w == 0 {
            return;
        }
        for j in 0..self.layout.n_animals() {
            let a1 = self.intake.animal_values(j)[0];
            let row = &mut out[j * w..(j + 1) * w];
            row[0] = a1;
            if let Some(b) = &self.sink_block {
                let a_s = b.animal_values(j);
                row[1] = a1 + crate::linalg::dot(&self.lambda, a_s);
                row[2..].copy_from_slice(a_s);
            }
        }
    }

    fn n_animals(&self) -> usize {
        if self.has_animal() {
            self.layout.n_animals()
        } else {
            0
        }
    }
}
