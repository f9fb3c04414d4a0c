use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A dimension ratio or parameter lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// The regressor matrix is numerically rank-deficient.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// A matrix expected to be positive definite failed its Cholesky factorization.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An asymptotic-regime ratio constraint is violated.
    #[error("ratio domain violation: {0}")]
    RatioDomain(String),

    /// A plug-in moment estimate came out inadmissible.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// A numerical routine failed to reach its target accuracy.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Malformed configuration or data file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for statistical/domain failures (CLI exit code 1),
    /// false for I/O and parse failures (exit code 2).
    pub fn is_statistical(&self) -> bool {
        !matches!(self, Error::Parse(_) | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
