//! The `simulate`, `fit`, `diagnose` and `compare` workflows.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rfi_core::baseline::{fit_stage1, stage2_data, stage2_spec};
use rfi_core::data::{build_design, standardize, trait_matrix, DIM_LEVELS, TRAIT_NAMES};
use rfi_core::diagnostics::{average_ranks, spearman};
use rfi_core::pedigree::relationship_inverse;
use rfi_core::simulator::{self, DesignSizes};
use rfi_core::{ModelData, ModelFamily, ModelSpec, Pedigree, StandardizationInfo};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::io;
use crate::runner::{genetic_values, run_chains_parallel, shrink_trajectories, summarize_chains, surviving_chains};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.json";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const GENETIC_VALUES: &str = "genetic_values.csv";
pub const DEFAULT_STRIDE: usize = 50;

pub fn samples_file(c: usize) -> String {
    format!("samples_chain{c}.csv")
}

pub fn trace_file(c: usize) -> String {
    format!("trace_chain{c}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedChain {
    pub chain: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardization: Option<StandardizationInfo>,
    /// Chains that completed, in output order.
    #[serde(default)]
    pub chains: Vec<usize>,
    #[serde(default)]
    pub failed_chains: Vec<FailedChain>,
    pub outputs: Vec<String>,
    pub timings_seconds: BTreeMap<String, f64>,
}

impl Manifest {
    fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            spec: None,
            inputs: Vec::new(),
            seed,
            standardization: None,
            chains: Vec::new(),
            failed_chains: Vec::new(),
            outputs: Vec::new(),
            timings_seconds: BTreeMap::new(),
        }
    }

    fn digest(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputDigest { path: path.to_path_buf(), sha256: io::sha256_file(path)? });
        Ok(())
    }

    fn write(mut self, dir: &Path) -> Result<()> {
        self.outputs.push(MANIFEST.into());
        io::write_json(&dir.join(MANIFEST), &self)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub family: Option<ModelFamily>,
    pub seed: Option<u64>,
}

/// Writes `pedigree.csv`, `phenotypes.csv` and `truth.json` into `out`.
pub fn simulate(cfg: &Config, overrides: &Overrides, out: &Path) -> Result<Manifest> {
    let s = &cfg.simulate;
    if s.offspring == 0 {
        return Err(CliError::Validation("simulation needs at least one phenotyped animal".into()));
    }
    let seed = overrides.seed.unwrap_or(s.seed);
    let start = Instant::now();
    create_dir(out)?;
    let truth = simulator::calibrated_truth(s.test_week_var)?;
    let pedigree = simulator::simulate_pedigree(s.sires, s.dams, s.offspring, seed)?;
    let sizes = DesignSizes { dim_levels: DIM_LEVELS.to_vec(), n_test_weeks: s.test_weeks };
    let mut records = simulator::simulate_phenotypes(&pedigree, &truth, &sizes, seed)?;
    if s.match_published {
        simulator::match_moments(&mut records, &simulator::published_correlation_matrix())?;
    }
    if s.raw {
        records = simulator::to_raw(&records, &truth.standardization()?);
    }
    let mut m = Manifest::new("simulate", seed);
    io::write_pedigree(&out.join("pedigree.csv"), pedigree.entries())?;
    io::write_phenotypes(&out.join("phenotypes.csv"), &records)?;
    io::write_json(&out.join("truth.json"), &truth)?;
    m.outputs = vec!["pedigree.csv".into(), "phenotypes.csv".into(), "truth.json".into()];
    m.timings_seconds.insert("simulate".into(), start.elapsed().as_secs_f64());
    m.clone().write(out)?;
    Ok(m)
}

/// Everything a fit reads, loaded and standardized.
pub struct LoadedData {
    pub pedigree: Pedigree,
    pub records: Vec<rfi_core::PhenotypeRecord>,
    pub standardization: StandardizationInfo,
}

pub fn load_data(cfg: &Config) -> Result<LoadedData> {
    let pedigree = Pedigree::new(io::read_pedigree(&cfg.data.pedigree)?)?;
    let raw = io::read_phenotypes(&cfg.data.phenotypes, Some(&DIM_LEVELS))?;
    let (records, standardization) = standardize(&raw)?;
    Ok(LoadedData { pedigree, records, standardization })
}

/// Fits one model family and writes the run directory.
pub fn fit(cfg: &Config, overrides: &Overrides, out: &Path) -> Result<Manifest> {
    let mut cfg = cfg.clone();
    if let Some(f) = overrides.family {
        cfg.model.family = f.name().into();
    }
    if let Some(s) = overrides.seed {
        cfg.mcmc.seed = s;
    }
    let spec = cfg.model_spec()?;
    let mut m = Manifest::new("fit", spec.mcmc.base_seed);
    m.digest(&cfg.data.pedigree)?;
    m.digest(&cfg.data.phenotypes)?;
    let t0 = Instant::now();
    let loaded = load_data(&cfg)?;
    m.timings_seconds.insert("load".into(), t0.elapsed().as_secs_f64());
    m.standardization = Some(loaded.standardization.clone());
    m.spec = Some(spec.clone());
    create_dir(out)?;
    if spec.family == ModelFamily::Lr1 {
        fit_lr1(&cfg, &spec, &loaded, out, &mut m)?;
    } else {
        let data = ModelData::new(&loaded.records, Some(&loaded.pedigree), &spec)?;
        fit_mcmc(&spec, &data, out, &mut m)?;
    }
    m.clone().write(out)?;
    Ok(m)
}

fn fit_lr1(cfg: &Config, spec: &ModelSpec, loaded: &LoadedData, out: &Path, m: &mut Manifest) -> Result<()> {
    let t = Instant::now();
    let y = trait_matrix(&loaded.records).select_columns(&spec.trait_order());
    let fit = fit_stage1(&y)?;
    let terms: Vec<&str> = spec.sink_indices.iter().map(|&j| TRAIT_NAMES[j]).collect();
    io::write_rows(
        &out.join("coefficients.csv"),
        &["term", "estimate", "se"],
        terms
            .iter()
            .zip(fit.coefficients.iter().zip(&fit.standard_errors))
            .map(|(t, (b, se))| vec![t.to_string(), b.to_string(), se.to_string()]),
    )?;
    io::write_rows(
        &out.join("rfi_phenotypes.csv"),
        &["animal", "rfi_phenotype"],
        loaded.records.iter().zip(&fit.residuals).map(|(r, e)| vec![r.animal.to_string(), e.to_string()]),
    )?;
    m.outputs.extend(["coefficients.csv".into(), "rfi_phenotypes.csv".into()]);
    m.timings_seconds.insert("stage1".into(), t.elapsed().as_secs_f64());
    if cfg.model.stage2 {
        let s2 = stage2_spec(&ModelSpec { effects: rfi_core::data::EffectSet::FULL, ..spec.clone() });
        let design = build_design(&loaded.records, s2.effects, Some(&loaded.pedigree))?;
        let data = stage2_data(
            &fit.residuals,
            design,
            Some(relationship_inverse(&loaded.pedigree)),
            loaded.pedigree.ids(),
        )?;
        fit_mcmc(&s2, &data, out, m)?;
    }
    Ok(())
}

fn fit_mcmc(spec: &ModelSpec, data: &ModelData, out: &Path, m: &mut Manifest) -> Result<()> {
    let t = Instant::now();
    let results = run_chains_parallel(spec, data);
    m.timings_seconds.insert("sampling".into(), t.elapsed().as_secs_f64());
    let (chains, failed) = surviving_chains(results)?;
    m.failed_chains = failed.into_iter().map(|(chain, error)| FailedChain { chain, error }).collect();
    let t = Instant::now();
    for c in &chains {
        let idx = (c.seed - spec.mcmc.base_seed) as usize;
        m.chains.push(idx);
        io::write_samples(&out.join(samples_file(idx)), c)?;
        io::write_trace(&out.join(trace_file(idx)), c)?;
        m.outputs.extend([samples_file(idx), trace_file(idx)]);
    }
    let summary = summarize_chains(spec, data, &chains)?;
    io::write_json(&out.join(SUMMARY), &summary)?;
    m.outputs.push(SUMMARY.into());
    if let Some((names, values)) = genetic_values(&chains) {
        io::write_genetic_values(&out.join(GENETIC_VALUES), &data.animal_ids, &names, &values)?;
        m.outputs.push(GENETIC_VALUES.into());
    }
    if chains.len() >= 2 {
        let traces: Vec<_> = chains.iter().map(|c| c.trace.clone()).collect();
        write_diagnostics(&out.join(DIAGNOSTICS), &chains[0].param_names, &traces, DEFAULT_STRIDE)?;
        m.outputs.push(DIAGNOSTICS.into());
    }
    m.timings_seconds.insert("outputs".into(), t.elapsed().as_secs_f64());
    Ok(())
}

fn write_diagnostics(path: &Path, names: &[String], traces: &[rfi_core::Matrix], stride: usize) -> Result<()> {
    let rows = shrink_trajectories(names, traces, stride)?;
    io::write_rows(
        path,
        &["param", "iteration", "sf"],
        rows.into_iter().map(|(p, it, sf)| vec![p, it.to_string(), sf.to_string()]),
    )
}

pub fn read_manifest(run: &Path) -> Result<Manifest> {
    let path = run.join(MANIFEST);
    if !path.exists() {
        return Err(CliError::io(&path, "run manifest not found"));
    }
    io::read_json(&path)
}

/// Recomputes shrink-factor trajectories from a run's trace files.
pub fn diagnose(run: &Path, stride: usize, out: Option<&Path>) -> Result<PathBuf> {
    let m = read_manifest(run)?;
    if m.chains.len() < 2 {
        return Err(CliError::Validation(format!("{} has {} chain(s); need at least two", run.display(), m.chains.len())));
    }
    let mut names = Vec::new();
    let mut traces = Vec::new();
    for &c in &m.chains {
        let (n, t) = io::read_trace(&run.join(trace_file(c)))?;
        names = n;
        traces.push(t);
    }
    let path = out.map_or_else(|| run.join(DIAGNOSTICS), Path::to_path_buf);
    write_diagnostics(&path, &names, &traces, stride)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub column: String,
    pub animals: usize,
    pub spearman: f64,
}

/// Spearman correlation of one genetic-value column between two runs over
/// their shared animals, with per-animal ranks written to `out`.
pub fn compare(run_a: &Path, run_b: &Path, column: &str, out: &Path) -> Result<Comparison> {
    let a = io::read_genetic_values(&run_a.join(GENETIC_VALUES), column)?;
    let b: BTreeMap<i64, f64> = io::read_genetic_values(&run_b.join(GENETIC_VALUES), column)?.into_iter().collect();
    let shared: Vec<(i64, f64, f64)> = a.iter().filter_map(|&(id, va)| b.get(&id).map(|&vb| (id, va, vb))).collect();
    if shared.is_empty() {
        return Err(CliError::Validation("runs share no animals".into()));
    }
    let xa: Vec<f64> = shared.iter().map(|s| s.1).collect();
    let xb: Vec<f64> = shared.iter().map(|s| s.2).collect();
    let rho = spearman(&xa, &xb)?;
    let (ra, rb) = (average_ranks(&xa), average_ranks(&xb));
    io::write_rows(
        out,
        &["animal", "gv_model_a", "gv_model_b", "rank_a", "rank_b"],
        shared.iter().enumerate().map(|(i, s)| {
            vec![s.0.to_string(), s.1.to_string(), s.2.to_string(), ra[i].to_string(), rb[i].to_string()]
        }),
    )?;
    Ok(Comparison { column: column.into(), animals: shared.len(), spearman: rho })
}
