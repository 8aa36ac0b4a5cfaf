//! Argument parsing and dispatch for the `rfi` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rfi_core::ModelFamily;

use crate::config::Config;
use crate::error::Result;
use crate::workflow::{self, Overrides, DEFAULT_STRIDE};

#[derive(Debug, Parser)]
#[command(name = "rfi", version, about = "Residual feed intake with recursive structural equation models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a pedigree and phenotypes with known truth.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "sim")]
        out: PathBuf,
    },
    /// Fit one model family and write a run directory.
    Fit {
        #[arg(long)]
        config: Option<PathBuf>,
        /// lr1, lr2, lr3, rsem1, rsem2, rsem3, st, mt or mt_chol.
        #[arg(long)]
        family: Option<ModelFamily>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Shrink-factor trajectories for a run with several chains.
    Diagnose {
        run: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STRIDE)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spearman correlation of genetic values between two runs.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Genetic-value column to compare.
        #[arg(long, default_value = "rfi")]
        column: String,
        #[arg(long, default_value = "compare.csv")]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    path.as_deref().map_or_else(|| Ok(Config::default()), Config::load)
}

/// Runs the parsed command, printing a one-line result to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let cfg = load_config(&config)?;
            let m = workflow::simulate(&cfg, &Overrides { family: None, seed }, &out)?;
            println!("wrote {} files to {} (seed {})", m.outputs.len(), out.display(), m.seed);
        }
        Command::Fit { config, family, seed, out } => {
            let cfg = load_config(&config)?;
            let m = workflow::fit(&cfg, &Overrides { family, seed }, &out)?;
            let failed = m.failed_chains.len();
            println!("wrote {} files to {} ({failed} failed chains)", m.outputs.len(), out.display());
        }
        Command::Diagnose { run, stride, out } => {
            let path = workflow::diagnose(&run, stride, out.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Compare { run_a, run_b, column, out } => {
            let c = workflow::compare(&run_a, &run_b, &column, &out)?;
            println!("{}", serde_json::to_string(&c).expect("comparison serializes"));
        }
    }
    Ok(())
}
