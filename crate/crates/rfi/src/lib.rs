//! File formats, parallel chain execution and the command-line workflows
//! built on [`rfi_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod runner;
pub mod workflow;

pub use error::{CliError, Result};
