//! Single-trait and multiple-trait animal models, and the multiple-trait
//! model reparameterized by a modified Cholesky decomposition into a fully
//! recursive system.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::GibbsSampler;
use crate::data::{ModelData, ModelFamily, ModelSpec};
use crate::dist::{self, ChainRng};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::mme::{Layout, TraitBlock};
use crate::rsem::{
    column_variance, push_matrix_names, push_matrix_values, random_start_cov, uniform, PriorSpec,
    StructuralConditional, STREAM_INIT,
};

fn check_family(spec: &ModelSpec, want: ModelFamily) -> Result<()> {
    if spec.family != want {
        return Err(Error::Validation(format!("expected a {want} spec, got {}", spec.family)));
    }
    Ok(())
}

/// Partial regression of trait 0 on traits `1..k` from a covariance
/// matrix: `V22^{-1} c12`.
pub fn partial_regression(cov: &Matrix) -> Result<Vec<f64>> {
    let k = cov.rows();
    let s: Vec<usize> = (1..k).collect();
    let v22 = cov.submatrix(&s, &s);
    let c12: Vec<f64> = s.iter().map(|&j| cov[(0, j)]).collect();
    Ok(v22.cholesky()?.solve(&c12))
}

fn fresh_block(layout: &Layout, y: &Matrix, rng: &mut ChainRng) -> TraitBlock {
    let vars: Vec<f64> = (0..y.cols()).map(|j| column_variance(&y.column(j))).collect();
    let r = random_start_cov(rng, &vars);
    let g = random_start_cov(rng, &vars);
    let tw = vars.iter().map(|v| v * uniform(rng, 0.05, 0.5)).collect();
    TraitBlock::new(layout, y, r, g, tw)
}

/// Independent single-trait animal models, one per trait.
pub struct StSampler<'a> {
    data: &'a ModelData,
    spec: &'a ModelSpec,
    layout: Layout,
    pub blocks: Vec<TraitBlock>,
    rngs: Vec<ChainRng>,
    iteration: usize,
}

impl<'a> StSampler<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a ModelData, seed: u64) -> Result<Self> {
        check_family(spec, ModelFamily::St)?;
        let layout = Layout::new(&data.design);
        let mut init = dist::stream(seed, STREAM_INIT);
        let blocks = (0..data.n_traits())
            .map(|j| fresh_block(&layout, &data.y.select_columns(&[j]), &mut init))
            .collect();
        let rngs = (0..data.n_traits()).map(|j| dist::stream(seed, 1 + j as u64)).collect();
        Ok(Self { data, spec, layout, blocks, rngs, iteration: 0 })
    }

    fn has_animal(&self) -> bool {
        self.data.ainv.is_some() && self.layout.has_animal()
    }
}

impl GibbsSampler for StSampler<'_> {
    fn param_names(&self) -> Vec<String> {
        let mut n = Vec::new();
        for name in &self.data.trait_names {
            if self.layout.intercept {
                n.push(format!("mu.{name}"));
            }
            n.push(format!("sigma2_e.{name}"));
            if self.has_animal() {
                n.push(format!("sigma2_a.{name}"));
            }
            if self.layout.has_test_week() {
                n.push(format!("sigma2_tw.{name}"));
            }
            if self.has_animal() {
                n.push(format!("h2.{name}"));
                if self.layout.has_test_week() {
                    n.push(format!("h2_tw.{name}"));
                }
            }
        }
        n
    }

    fn record_params(&self, out: &mut Vec<f64>) {
        out.clear();
        for b in &self.blocks {
            if self.layout.intercept {
                out.push(b.fixed[0]);
            }
            let se = b.residual_cov[(0, 0)];
            let sa = b.genetic_cov[(0, 0)];
            out.push(se);
            if self.has_animal() {
                out.push(sa);
            }
            if self.layout.has_test_week() {
                out.push(b.test_week_var[0]);
            }
            if self.has_animal() {
                out.push(sa / (sa + se));
                if self.layout.has_test_week() {
                    out.push(sa / (sa + se + b.test_week_var[0]));
                }
            }
        }
    }

    fn sweep(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let ainv = self.data.ainv.as_ref();
        let prior = &self.spec.priors;
        for (b, rng) in self.blocks.iter_mut().zip(self.rngs.iter_mut()) {
            b.sample_locations(&self.layout, ainv, prior, rng).map_err(|e| e.at(it, "location effects"))?;
        }
        for (b, rng) in self.blocks.iter_mut().zip(self.rngs.iter_mut()) {
            b.sample_covariances(&self.layout, ainv, prior, rng)
                .map_err(|e| e.at(it, "variance components"))?;
        }
        Ok(())
    }

    fn genetic_value_names(&self) -> Vec<String> {
        if self.has_animal() {
            self.data.trait_names.clone()
        } else {
            Vec::new()
        }
    }

    fn record_genetic_values(&self, out: &mut [f64]) {
        let w = self.blocks.len();
        for j in 0..self.n_animals() {
            for (s, b) in self.blocks.iter().enumerate() {
                out[j * w + s] = b.animal_values(j)[0];
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

/// Multiple-trait animal model with unstructured `G` and `R`.
///
/// RFI genetic values are derived per sample as `a_1 - b_p' a_s`, with
/// `b_p` the phenotypic partial regression implied by the current
/// `G + R + diag(sigma2_tw)`.
pub struct MtSampler<'a> {
    data: &'a ModelData,
    spec: &'a ModelSpec,
    layout: Layout,
    pub block: TraitBlock,
    rng: ChainRng,
    iteration: usize,
}

impl<'a> MtSampler<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a ModelData, seed: u64) -> Result<Self> {
        check_family(spec, ModelFamily::Mt)?;
        if data.ainv.is_none() {
            return Err(Error::Validation("the multiple-trait model needs animal effects".into()));
        }
        let layout = Layout::new(&data.design);
        let mut init = dist::stream(seed, STREAM_INIT);
        let block = fresh_block(&layout, &data.y, &mut init);
        Ok(Self { data, spec, layout, block, rng: dist::stream(seed, 1), iteration: 0 })
    }

    /// Phenotypic covariance implied by the current state.
    pub fn phenotypic_covariance(&self) -> Matrix {
        let mut p = self.block.genetic_cov.add(&self.block.residual_cov);
        if self.layout.has_test_week() {
            for (s, v) in self.block.test_week_var.iter().enumerate() {
                p[(s, s)] += v;
            }
        }
        p
    }

    fn k(&self) -> usize {
        self.data.n_traits()
    }
}

/// Genetic covariances of `a_1 - b' a_s` with every trait and its variance.
fn rfi_genetic_covariances(g: &Matrix, b: &[f64]) -> (Vec<f64>, f64) {
    let k = g.rows();
    let cov: Vec<f64> = (0..k)
        .map(|j| g[(0, j)] - (1..k).map(|s| b[s - 1] * g[(s, j)]).sum::<f64>())
        .collect();
    let var = cov[0] - (1..k).map(|s| b[s - 1] * cov[s]).sum::<f64>();
    (cov, var)
}

impl GibbsSampler for MtSampler<'_> {
    fn param_names(&self) -> Vec<String> {
        let names = &self.data.trait_names;
        let mut n = Vec::new();
        if self.layout.intercept {
            n.extend(names.iter().map(|t| format!("mu.{t}")));
        }
        push_matrix_names(&mut n, "R", names);
        push_matrix_names(&mut n, "G", names);
        if self.layout.has_test_week() {
            n.extend(names.iter().map(|t| format!("sigma2_tw.{t}")));
        }
        n.extend(names.iter().map(|t| format!("h2.{t}")));
        for a in 0..names.len() {
            for b in a + 1..names.len() {
                n.push(format!("rg.{}_{}", names[a], names[b]));
            }
        }
        n.extend(names[1..].iter().map(|t| format!("b_p.{t}")));
        n.extend(names[1..].iter().map(|t| format!("b_g.{t}")));
        n.extend(names.iter().map(|t| format!("rg.{t}_rfi")));
        if self.layout.has_test_week() {
            n.extend(names.iter().map(|t| format!("h2_tw.{t}")));
        }
        n
    }

    fn record_params(&self, out: &mut Vec<f64>) {
        out.clear();
        let k = self.k();
        let b = &self.block;
        if self.layout.intercept {
            out.extend(&b.fixed[..k]);
        }
        push_matrix_values(out, &b.residual_cov);
        push_matrix_values(out, &b.genetic_cov);
        if self.layout.has_test_week() {
            out.extend(&b.test_week_var);
        }
        let g = &b.genetic_cov;
        let p = self.phenotypic_covariance();
        let r = &b.residual_cov;
        for s in 0..k {
            out.push(g[(s, s)] / (g[(s, s)] + r[(s, s)]));
        }
        for a in 0..k {
            for c in a + 1..k {
                out.push(g[(a, c)] / libm::sqrt(g[(a, a)] * g[(c, c)]));
            }
        }
        let nan = vec![f64::NAN; k - 1];
        let bp = partial_regression(&p).unwrap_or_else(|_| nan.clone());
        out.extend(&bp);
        out.extend(&partial_regression(g).unwrap_or(nan));
        let (cov, var) = rfi_genetic_covariances(g, &bp);
        for s in 0..k {
            out.push(cov[s] / libm::sqrt(var * g[(s, s)]));
        }
        if self.layout.has_test_week() {
            for s in 0..k {
                out.push(g[(s, s)] / p[(s, s)]);
            }
        }
    }

    fn sweep(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let ainv = self.data.ainv.as_ref();
        let prior = &self.spec.priors;
        self.block
            .sample_locations(&self.layout, ainv, prior, &mut self.rng)
            .map_err(|e| e.at(it, "location effects"))?;
        self.block
            .sample_covariances(&self.layout, ainv, prior, &mut self.rng)
            .map_err(|e| e.at(it, "variance components"))?;
        Ok(())
    }

    fn genetic_value_names(&self) -> Vec<String> {
        let mut n = self.data.trait_names.clone();
        n.push("rfi".to_string());
        n
    }

    fn record_genetic_values(&self, out: &mut [f64]) {
        let k = self.k();
        let w = k + 1;
        let bp = partial_regression(&self.phenotypic_covariance()).unwrap_or_else(|_| vec![0.0; k - 1]);
        for j in 0..self.layout.n_animals() {
            let a = self.block.animal_values(j);
            let row = &mut out[j * w..(j + 1) * w];
            row[..k].copy_from_slice(a);
            row[k] = a[0] - dot(&bp, &a[1..]);
        }
    }

    fn n_animals(&self) -> usize {
        self.layout.n_animals()
    }
}

/// `Sigma = L D L'` in a given trait order, read as a recursive system.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyStructure {
    /// Original trait index at each position of the recursive order.
    pub order: Vec<usize>,
    /// Unit lower-triangular factor in the recursive order.
    pub l: Matrix,
    pub d: Vec<f64>,
}

impl CholeskyStructure {
    /// Effect of each earlier variable on each later one, in original trait
    /// indices: `coefficients[(j, j')] = b_{jj'}`. These are the negated
    /// off-diagonals of `L^{-1}`, so `x_j - sum b_{jj'} x_{j'}` are the
    /// mutually uncorrelated reparameterized variables.
    pub fn coefficients(&self) -> Result<Matrix> {
        let k = self.order.len();
        let linv = self.l.inverse()?;
        let mut b = Matrix::zeros(k, k);
        for p in 0..k {
            for q in 0..p {
                b[(self.order[p], self.order[q])] = -linv[(p, q)];
            }
        }
        Ok(b)
    }

    /// `L D L'` mapped back to the original trait order.
    pub fn reconstruct(&self) -> Matrix {
        let k = self.order.len();
        let ld = Matrix::from_fn(k, k, |i, j| self.l[(i, j)] * self.d[j]);
        let perm = ld.matmul(&self.l.transpose()).expect("square factors");
        let mut out = Matrix::zeros(k, k);
        for p in 0..k {
            for q in 0..k {
                out[(self.order[p], self.order[q])] = perm[(p, q)];
            }
        }
        out
    }

    /// Reparameterized variables `L^{-1} y` (columns in original order).
    pub fn reparameterize(&self, y: &Matrix) -> Result<Matrix> {
        let b = self.coefficients()?;
        Ok(Matrix::from_fn(y.rows(), y.cols(), |i, j| {
            y[(i, j)] - (0..y.cols()).map(|q| b[(j, q)] * y[(i, q)]).sum::<f64>()
        }))
    }
}

/// Modified Cholesky decomposition of `sigma` with variables taken in
/// `order` (first = root of the recursion).
pub fn cholesky_reparameterize(sigma: &Matrix, order: &[usize]) -> Result<CholeskyStructure> {
    let k = sigma.rows();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if !sigma.is_square() || sorted != (0..k).collect::<Vec<_>>() {
        return Err(Error::Dimension("order must be a permutation of the covariance indices".into()));
    }
    let (l, d) = sigma.submatrix(order, order).ldl()?;
    Ok(CholeskyStructure { order: order.to_vec(), l, d })
}

/// The recursive order used by the reparameterized model: last sink first,
/// intake last.
pub fn recursive_order(k: usize) -> Vec<usize> {
    (0..k).rev().collect()
}

/// One equation of the fully recursive system: `y_j - sum b y_parent`
/// follows a single-trait animal model with its own variances.
pub struct RecursiveEquation {
    pub response: usize,
    pub parents: Vec<usize>,
    pub coef: Vec<f64>,
    pub block: TraitBlock,
    parent_values: Matrix,
    parent_cross: Matrix,
    rng: ChainRng,
}

impl RecursiveEquation {
    pub fn sigma2_e(&self) -> f64 {
        self.block.residual_cov[(0, 0)]
    }

    /// Location-adjusted response `y_j - (mu + x'beta + z'a)`.
    pub fn adjusted_response(&self) -> Vec<f64> {
        (0..self.parent_values.rows())
            .map(|i| self.block.residual(i)[0] + dot(self.parent_values.row(i), &self.coef))
            .collect()
    }

    pub fn conditional(&self, prior: &PriorSpec) -> Result<StructuralConditional> {
        let xw = self.parent_values.transpose_matvec(&self.adjusted_response());
        StructuralConditional::new(&self.parent_cross, &xw, self.sigma2_e(), prior.tau2, prior.lambda0)
    }

    fn sample_coefficients(&mut self, prior: &PriorSpec) -> Result<()> {
        if self.parents.is_empty() {
            return Ok(());
        }
        let new = self.conditional(prior)?.draw(&mut self.rng);
        for i in 0..self.parent_values.rows() {
            let x = self.parent_values.row(i);
            let delta: f64 = x.iter().zip(new.iter().zip(&self.coef)).map(|(x, (a, b))| x * (a - b)).sum();
            self.block.shift_response(i, 0, -delta);
        }
        self.coef = new;
        Ok(())
    }
}

/// Multiple-trait model reparameterized as a fully recursive system
/// (root = last sink, intake last). Each equation is an independent
/// single-trait model; the intake equation's coefficients are sampled from
/// the same conditional as the structural coefficients of the recursive
/// model.
pub struct MtCholSampler<'a> {
    data: &'a ModelData,
    spec: &'a ModelSpec,
    layout: Layout,
    /// In recursive order.
    pub equations: Vec<RecursiveEquation>,
    iteration: usize,
}

impl<'a> MtCholSampler<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a ModelData, seed: u64) -> Result<Self> {
        check_family(spec, ModelFamily::MtChol)?;
        let layout = Layout::new(&data.design);
        let k = data.n_traits();
        let order = recursive_order(k);
        let mut init = dist::stream(seed, STREAM_INIT);
        let mut equations = Vec::with_capacity(k);
        for (p, &j) in order.iter().enumerate() {
            let mut parents = order[..p].to_vec();
            parents.sort_unstable();
            let coef: Vec<f64> = parents.iter().map(|_| uniform(&mut init, -1.0, 1.0)).collect();
            let x = data.y.select_columns(&parents);
            let yj = data.y.column(j);
            let ystar: Vec<f64> = (0..data.n_records()).map(|i| yj[i] - dot(x.row(i), &coef)).collect();
            let block = fresh_block(&layout, &Matrix::from_row_slice(ystar.len(), 1, &ystar), &mut init);
            equations.push(RecursiveEquation {
                response: j,
                parent_cross: x.gram(),
                parent_values: x,
                parents,
                coef,
                block,
                rng: dist::stream(seed, 1 + j as u64),
            });
        }
        Ok(Self { data, spec, layout, equations, iteration: 0 })
    }

    /// The equation whose response is trait `j`.
    pub fn equation(&self, j: usize) -> &RecursiveEquation {
        self.equations.iter().find(|e| e.response == j).expect("every trait has an equation")
    }

    pub fn equation_mut(&mut self, j: usize) -> &mut RecursiveEquation {
        self.equations.iter_mut().find(|e| e.response == j).expect("every trait has an equation")
    }

    /// Conditional means of all coefficients from the joint system, with
    /// every row scaled by the intake residual variance: rows for equation
    /// `j` carry `sigma2_e1 / sigma2_ej` on the data terms and
    /// `sigma2_e1 / tau2` on the ridge. Returned in recursive order,
    /// parents ascending within each equation.
    pub fn joint_conditional_means(&self) -> Result<Vec<f64>> {
        let prior = &self.spec.priors;
        let s1 = self.equation(0).sigma2_e();
        let sizes: Vec<usize> = self.equations.iter().map(|e| e.parents.len()).collect();
        let dim: usize = sizes.iter().sum();
        let mut c = Matrix::zeros(dim, dim);
        let mut rhs = vec![0.0; dim];
        let mut off = 0;
        for e in &self.equations {
            let w = e.adjusted_response();
            let scale = s1 / e.sigma2_e();
            for (a, &pa) in e.parents.iter().enumerate() {
                let ya = self.data.y.column(pa);
                for (b, &pb) in e.parents.iter().enumerate() {
                    let yb = self.data.y.column(pb);
                    c[(off + a, off + b)] = scale * dot(&ya, &yb);
                }
                c[(off + a, off + a)] += s1 / prior.tau2;
                rhs[off + a] = scale * dot(&ya, &w) + s1 * prior.lambda0 / prior.tau2;
            }
            off += e.parents.len();
        }
        Ok(c.cholesky()?.solve(&rhs))
    }

    fn has_animal(&self) -> bool {
        self.data.ainv.is_some() && self.layout.has_animal()
    }

    fn equation_name(&self, j: usize) -> String {
        if j == 0 {
            "rfi".to_string()
        } else {
            self.data.trait_names[j].clone()
        }
    }
}

impl GibbsSampler for MtCholSampler<'_> {
    fn param_names(&self) -> Vec<String> {
        let names = &self.data.trait_names;
        let mut n = Vec::new();
        for e in &self.equations {
            for &p in &e.parents {
                n.push(format!("b.{}_{}", names[e.response], names[p]));
            }
        }
        for e in &self.equations {
            let t = self.equation_name(e.response);
            if self.layout.intercept {
                n.push(format!("mu.{t}"));
            }
            n.push(format!("sigma2_e.{t}"));
            if self.has_animal() {
                n.push(format!("sigma2_a.{t}"));
            }
            if self.layout.has_test_week() {
                n.push(format!("sigma2_tw.{t}"));
            }
        }
        n
    }

    fn record_params(&self, out: &mut Vec<f64>) {
        out.clear();
        for e in &self.equations {
            out.extend(&e.coef);
        }
        for e in &self.equations {
            if self.layout.intercept {
                out.push(e.block.fixed[0]);
            }
            out.push(e.sigma2_e());
            if self.has_animal() {
                out.push(e.block.genetic_cov[(0, 0)]);
            }
            if self.layout.has_test_week() {
                out.push(e.block.test_week_var[0]);
            }
        }
    }

    fn sweep(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let ainv = self.data.ainv.as_ref();
        let prior = &self.spec.priors;
        for e in self.equations.iter_mut() {
            e.sample_coefficients(prior).map_err(|err| err.at(it, "structural coefficients"))?;
        }
        for e in self.equations.iter_mut() {
            e.block
                .sample_locations(&self.layout, ainv, prior, &mut e.rng)
                .map_err(|err| err.at(it, "location effects"))?;
        }
        for e in self.equations.iter_mut() {
            e.block
                .sample_covariances(&self.layout, ainv, prior, &mut e.rng)
                .map_err(|err| err.at(it, "variance components"))?;
        }
        Ok(())
    }

    fn genetic_value_names(&self) -> Vec<String> {
        if !self.has_animal() {
            return Vec::new();
        }
        self.equations.iter().map(|e| self.equation_name(e.response)).collect()
    }

    fn record_genetic_values(&self, out: &mut [f64]) {
        let w = self.equations.len();
        for j in 0..self.n_animals() {
            for (s, e) in self.equations.iter().enumerate() {
                out[j * w + s] = e.block.animal_values(j)[0];
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
