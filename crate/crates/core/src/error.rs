use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// An iterative numerical method failed to reach its tolerance.
    #[error("numerical failure in {op}: {reason}")]
    Numeric { op: &'static str, reason: String },

    /// Cholesky factorization failed even after the maximum diagonal jitter.
    #[error("matrix of order {order} is not positive definite (pivot {pivot} failed with jitter {jitter:e})")]
    NotPositiveDefinite { order: usize, pivot: usize, jitter: f64 },

    /// The model is outside the configuration an operation supports.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The requested computation would exceed resource limits.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Not enough usable data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An exponent left the representable range of `f64`.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Reading or writing a sample dump failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain { op, reason: reason.into() }
    }

    pub(crate) fn numeric(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Numeric { op, reason: reason.into() }
    }
}
