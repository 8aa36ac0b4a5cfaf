//! Numerical core for residual feed intake (RFI) analysis with recursive
//! structural equation models.
//!
//! The crate is `no_std` with `alloc`: everything here is pure computation
//! over in-memory data. File formats, parallel chain scheduling and the
//! command-line front end live in the companion `rfi` crate.
//!
//! Module map:
//!
//! - [`pedigree`]: numerator relationship matrix and its sparse inverse.
//! - [`data`]: phenotype records, standardization, model specification and
//!   incidence structure.
//! - [`baseline`]: closed-form regressions (stage-one LR, LS and phenotypic
//!   partial regressions) and the stage-two mixed model.
//! - [`rsem`]: Gibbs sampler for the recursive model.
//! - [`mt`]: single-trait, multiple-trait and Cholesky-reparameterized models.
//! - [`genetics`]: covariance transformation, heritabilities, correlations.
//! - [`diagnostics`]: shrink factor, Spearman correlation, posterior summaries.
//! - [`simulator`]: synthetic pedigrees and phenotypes with known truth.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod chain;
pub mod data;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod genetics;
pub mod linalg;
pub mod mme;
pub mod mt;
pub mod pedigree;
pub mod rsem;
pub mod simulator;

pub use chain::{run_chain, ChainOutput};
pub use data::{Design, ModelData, ModelFamily, ModelSpec, PhenotypeRecord, StandardizationInfo};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use pedigree::{Pedigree, PedigreeEntry, RelationshipMatrix, SparseSymmetric};
