use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("validation error: {0}")]
    Validation(String),

    /// Pedigree cannot be ordered (cycle) or is otherwise structurally broken.
    #[error("pedigree structure error: {0}")]
    Structure(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure at iteration {iteration} while sampling {block}: {source}")]
    Sampler {
        iteration: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, iteration: usize, block: &'static str) -> Self {
        Error::Sampler {
            iteration,
            block,
            source: Box::new(self),
        }
    }

    /// True for errors raised by numerical routines rather than input checks.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite(_) | Error::RankDeficient(_) => true,
            Error::Sampler { .. } => true,
            _ => false,
        }
    }
}
