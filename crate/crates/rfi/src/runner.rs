//! Parallel chains and posterior summaries.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rfi_core::chain::{pooled_genetic_values, pooled_samples, run_model_chain};
use rfi_core::diagnostics::{sf_trajectory, summarize, Summary};
use rfi_core::mt::partial_regression;
use rfi_core::{ChainOutput, Matrix, ModelData, ModelFamily, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{MeanSd, NamedSummaries};

/// Runs every chain of `spec` on the rayon pool. Chain `c` uses seed
/// `base_seed + c`, so the output equals a sequential run.
pub fn run_chains_parallel(spec: &ModelSpec, data: &ModelData) -> Vec<rfi_core::Result<ChainOutput>> {
    (0..spec.mcmc.n_chains)
        .into_par_iter()
        .map(|c| run_model_chain(spec, data, c))
        .collect()
}

/// Splits chain results into the successful outputs and `(chain, error)`
/// pairs for the failures. Fails when no chain survived.
pub fn surviving_chains(results: Vec<rfi_core::Result<ChainOutput>>) -> Result<(Vec<ChainOutput>, Vec<(usize, String)>)> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut last = None;
    for (c, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => {
                log::error!("chain {c} failed: {e}");
                failed.push((c, e.to_string()));
                last = Some(e);
            }
        }
    }
    match (ok.is_empty(), last) {
        (true, Some(e)) => Err(e.into()),
        (true, None) => Err(CliError::Validation("no chains were run".into())),
        _ => Ok((ok, failed)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialRegressions {
    pub sinks: Vec<String>,
    pub phenotypic: Vec<f64>,
    pub genetic: Vec<f64>,
    /// Whether `genetic` averages per-sample regressions rather than using
    /// the posterior-mean genetic covariance.
    pub genetic_per_sample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub family: ModelFamily,
    pub chains: usize,
    pub saved_per_chain: usize,
    pub parameters: BTreeMap<String, Summary>,
    pub heritability: NamedSummaries,
    pub genetic_correlation: NamedSummaries,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partial_regression: Option<PartialRegressions>,
}

impl RunSummary {
    pub fn mean(&self, param: &str) -> Option<f64> {
        self.parameters.get(param).map(|s| s.mean)
    }
}

/// Posterior mean of a symmetric matrix stored as `prefix.a_b` entries.
pub fn posterior_mean_matrix(chains: &[ChainOutput], prefix: &str, traits: &[String]) -> Result<Matrix> {
    let k = traits.len();
    let mut m = Matrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let s = pooled_samples(chains, &format!("{prefix}.{}_{}", traits[a], traits[b]))?;
            let v = s.iter().sum::<f64>() / s.len() as f64;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

/// Pooled summaries of every parameter, with heritabilities and genetic
/// correlations collected under their own keys.
pub fn summarize_chains(spec: &ModelSpec, data: &ModelData, chains: &[ChainOutput]) -> Result<RunSummary> {
    let first = chains.first().ok_or_else(|| CliError::Validation("no chains to summarize".into()))?;
    let mut parameters = BTreeMap::new();
    let mut heritability = BTreeMap::new();
    let mut genetic_correlation = BTreeMap::new();
    for name in &first.param_names {
        let s = pooled_samples(chains, name)?;
        let sm = summarize(&s)?;
        let ms = MeanSd { mean: sm.mean, sd: sm.sd };
        if let Some(t) = name.strip_prefix("h2.") {
            heritability.insert(t.to_string(), ms);
        } else if let Some(p) = name.strip_prefix("rg.") {
            genetic_correlation.insert(p.to_string(), ms);
        }
        parameters.insert(name.clone(), sm);
    }
    let partial_regression = if spec.family == ModelFamily::Mt {
        let sinks: Vec<String> = data.trait_names[1..].to_vec();
        let mean_of = |prefix: &str| -> Result<Vec<f64>> {
            sinks.iter().map(|s| Ok(summarize(&pooled_samples(chains, &format!("{prefix}.{s}"))?)?.mean)).collect()
        };
        let genetic = if spec.per_sample_genetic_regression {
            mean_of("b_g")?
        } else {
            partial_regression(&posterior_mean_matrix(chains, "G", &data.trait_names)?)?
        };
        let phenotypic = mean_of("b_p")?;
        Some(PartialRegressions {
            sinks,
            phenotypic,
            genetic,
            genetic_per_sample: spec.per_sample_genetic_regression,
        })
    } else {
        None
    };
    Ok(RunSummary {
        family: spec.family,
        chains: chains.len(),
        saved_per_chain: first.saved_iterations.len(),
        parameters,
        heritability,
        genetic_correlation,
        partial_regression,
    })
}

/// Shrink-factor trajectories for every parameter: `(param, iteration, sf)`.
pub fn shrink_trajectories(names: &[String], traces: &[Matrix], stride: usize) -> Result<Vec<(String, usize, f64)>> {
    if traces.len() < 2 {
        return Err(CliError::Validation("diagnostics need at least two chains".into()));
    }
    let mut out = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let cols: Vec<Vec<f64>> = traces.iter().map(|t| t.column(j)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        for (it, sf) in sf_trajectory(&refs, stride)? {
            out.push((name.clone(), it, sf));
        }
    }
    Ok(out)
}

/// Pooled posterior-mean genetic values.
pub fn genetic_values(chains: &[ChainOutput]) -> Option<(Vec<String>, Matrix)> {
    let names = chains.first()?.genetic_value_names.clone();
    if names.is_empty() {
        return None;
    }
    Some((names, pooled_genetic_values(chains)?))
}
