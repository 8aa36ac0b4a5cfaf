//! TOML configuration mirroring the model specification.

use std::path::{Path, PathBuf};

use rfi_core::data::McmcSettings;
use rfi_core::rsem::PriorSpec;
use rfi_core::{ModelFamily, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub mcmc: McmcSection,
    pub priors: PriorSpec,
    pub data: DataSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    pub per_sample_genetic_regression: bool,
    /// For `lr1`: also fit the stage-two animal model on the residuals.
    pub stage2: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { family: "rsem3".into(), per_sample_genetic_regression: false, stage2: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcSection {
    pub chains: usize,
    pub length: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcSection {
    fn default() -> Self {
        let d = McmcSettings::default();
        Self { chains: d.n_chains, length: d.chain_length, burnin: d.burn_in, thin: d.thin, seed: d.base_seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub pedigree: PathBuf,
    pub phenotypes: PathBuf,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { pedigree: "pedigree.csv".into(), phenotypes: "phenotypes.csv".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub sires: usize,
    pub dams: usize,
    pub offspring: usize,
    pub test_weeks: usize,
    pub test_week_var: f64,
    pub seed: u64,
    /// Recolor the records to the published phenotypic correlations.
    pub match_published: bool,
    /// Write raw-unit phenotypes instead of standardized ones.
    pub raw: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        use rfi_core::simulator::*;
        Self {
            sires: REPLICA_SIRES,
            dams: REPLICA_DAMS,
            offspring: REPLICA_COWS,
            test_weeks: REPLICA_TEST_WEEKS,
            test_week_var: 0.05,
            seed: 645,
            match_published: true,
            raw: true,
        }
    }
}

impl Config {
    /// Parses `path`; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.data.pedigree, &mut cfg.data.phenotypes] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn family(&self) -> Result<ModelFamily> {
        Ok(self.model.family.parse()?)
    }

    pub fn mcmc_settings(&self) -> McmcSettings {
        McmcSettings {
            n_chains: self.mcmc.chains,
            chain_length: self.mcmc.length,
            burn_in: self.mcmc.burnin,
            thin: self.mcmc.thin,
            base_seed: self.mcmc.seed,
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut spec = ModelSpec::new(self.family()?);
        spec.priors = self.priors.clone();
        spec.mcmc = self.mcmc_settings();
        spec.per_sample_genetic_regression = self.model.per_sample_genetic_regression;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: Config = toml::from_str("[mcmc]\nchains = 4\n[priors]\ntau2 = 1e12\n").unwrap();
        assert_eq!(cfg.mcmc.chains, 4);
        assert_eq!(cfg.mcmc.length, 2200);
        assert_eq!(cfg.priors.tau2, 1e12);
        assert_eq!(cfg.priors.omega2, 1e6);
        assert_eq!(cfg.family().unwrap(), ModelFamily::Rsem3);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Config>("[mcmc]\nchainz = 4\n").is_err());
    }
}
