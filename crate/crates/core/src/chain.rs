//! Running a single MCMC chain and holding its output.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{McmcSettings, ModelData, ModelFamily, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mt::{MtCholSampler, MtSampler, StSampler};
use crate::rsem::RsemSampler;

/// One Gibbs sampler: a state that can be advanced by a full sweep and
/// reported as a flat parameter vector.
pub trait GibbsSampler {
    /// Names of the scalar parameters written by [`record_params`](Self::record_params).
    fn param_names(&self) -> Vec<String>;
    fn record_params(&self, out: &mut Vec<f64>);
    /// One full sweep over all blocks.
    fn sweep(&mut self) -> Result<()>;
    /// Columns of the per-animal genetic-value output.
    fn genetic_value_names(&self) -> Vec<String>;
    /// Writes `n_animals x names` values, row-major.
    fn record_genetic_values(&self, out: &mut [f64]);
    fn n_animals(&self) -> usize;
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub seed: u64,
    pub param_names: Vec<String>,
    /// `chain_length x params`, every iteration including burn-in.
    pub trace: Matrix,
    /// 1-based iterations of the saved states.
    pub saved_iterations: Vec<usize>,
    pub genetic_value_names: Vec<String>,
    /// Posterior means over saved states, `n_animals x names`.
    pub genetic_values: Matrix,
}

impl ChainOutput {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.param_index(name)
            .ok_or_else(|| Error::Validation(format!("unknown parameter {name}")))
    }

    /// Every iteration's value of `name`.
    pub fn trace_of(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.trace.column(self.require(name)?))
    }

    /// Saved (post burn-in, thinned) values of `name`.
    pub fn samples_of(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.require(name)?;
        Ok(self.saved_iterations.iter().map(|&it| self.trace[(it - 1, j)]).collect())
    }

    pub fn posterior_mean(&self, name: &str) -> Result<f64> {
        let s = self.samples_of(name)?;
        Ok(s.iter().sum::<f64>() / s.len() as f64)
    }

    pub fn genetic_value_column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.genetic_value_names.iter().position(|n| n == name)?;
        Some(self.genetic_values.column(j))
    }
}

/// Runs `settings.chain_length` sweeps, recording every state and averaging
/// genetic values over the saved ones.
pub fn run_chain<S: GibbsSampler + ?Sized>(sampler: &mut S, settings: &McmcSettings, seed: u64) -> Result<ChainOutput> {
    let names = sampler.param_names();
    let gv_names = sampler.genetic_value_names();
    let q = sampler.n_animals();
    let w = gv_names.len();
    let mut trace = Matrix::zeros(settings.chain_length, names.len());
    let mut row = Vec::with_capacity(names.len());
    let mut gv_sum = vec![0.0; q * w];
    let mut gv = vec![0.0; q * w];
    let mut saved = Vec::with_capacity(settings.saved_per_chain());
    for it in 1..=settings.chain_length {
        sampler.sweep()?;
        sampler.record_params(&mut row);
        debug_assert_eq!(row.len(), names.len());
        trace.row_mut(it - 1).copy_from_slice(&row);
        if settings.is_saved(it) {
            saved.push(it);
            if w > 0 {
                sampler.record_genetic_values(&mut gv);
                gv_sum.iter_mut().zip(&gv).for_each(|(a, b)| *a += b);
            }
        }
    }
    let m = saved.len().max(1) as f64;
    gv_sum.iter_mut().for_each(|v| *v /= m);
    Ok(ChainOutput {
        seed,
        param_names: names,
        trace,
        saved_iterations: saved,
        genetic_value_names: gv_names,
        genetic_values: Matrix::from_row_slice(q, w, &gv_sum),
    })
}

/// Builds the sampler for `spec.family`.
pub fn build_sampler<'a>(spec: &'a ModelSpec, data: &'a ModelData, seed: u64) -> Result<Box<dyn GibbsSampler + 'a>> {
    use ModelFamily::*;
    Ok(match spec.family {
        Lr2 | Lr3 | Rsem1 | Rsem2 | Rsem3 => Box::new(RsemSampler::new(spec, data, seed)?),
        St => Box::new(StSampler::new(spec, data, seed)?),
        Mt => Box::new(MtSampler::new(spec, data, seed)?),
        MtChol => Box::new(MtCholSampler::new(spec, data, seed)?),
        Lr1 => return Err(Error::Validation("LR1 is fitted in closed form, not by MCMC".into())),
    })
}

/// Seed of chain `c`.
pub fn chain_seed(settings: &McmcSettings, c: usize) -> u64 {
    settings.base_seed.wrapping_add(c as u64)
}

/// Runs chain `c` of `spec`.
pub fn run_model_chain(spec: &ModelSpec, data: &ModelData, c: usize) -> Result<ChainOutput> {
    let seed = chain_seed(&spec.mcmc, c);
    let mut sampler = build_sampler(spec, data, seed)?;
    run_chain(sampler.as_mut(), &spec.mcmc, seed)
}

/// All chains, one after another. A failed chain is reported in place.
pub fn run_chains_sequential(spec: &ModelSpec, data: &ModelData) -> Vec<Result<ChainOutput>> {
    (0..spec.mcmc.n_chains).map(|c| run_model_chain(spec, data, c)).collect()
}

/// Saved draws of `name` pooled over chains.
pub fn pooled_samples(chains: &[ChainOutput], name: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for c in chains {
        out.extend(c.samples_of(name)?);
    }
    Ok(out)
}

/// Genetic values averaged over chains (each chain weighted by its saved
/// count).
pub fn pooled_genetic_values(chains: &[ChainOutput]) -> Option<Matrix> {
    let first = chains.first()?;
    let (q, w) = (first.genetic_values.rows(), first.genetic_values.cols());
    let mut sum = Matrix::zeros(q, w);
    let mut total = 0.0;
    for c in chains {
        let m = c.saved_iterations.len() as f64;
        sum = sum.add(&c.genetic_values.scale(m));
        total += m;
    }
    Some(sum.scale(1.0 / total))
}
