use std::path::PathBuf;

/// Errors produced by the analysis toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value at mask {mask}: {context}")]
    NonFinite { mask: usize, context: String },

    #[error("failed to parse {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("optimization diverged at iteration {iteration}: loss = {loss}")]
    Optimization { iteration: usize, loss: f64 },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Training { epoch: usize, loss: f64 },

    #[error("linear solve failed ({reason}); condition estimate {condition:.3e}")]
    LinearAlgebra { reason: String, condition: f64 },

    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),

    #[error("similarity undefined: both distributions are all-zero")]
    UndefinedSimilarity,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Broad classes used by front ends to pick an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or missing input data.
    Data,
    /// Optimizer, solver or normalizer failure.
    Numeric,
    /// Bad configuration or argument values.
    Usage,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::Shape(_)
            | Error::NonFinite { .. }
            | Error::Parse { .. }
            | Error::Io { .. } => ErrorClass::Data,
            Error::Optimization { .. }
            | Error::Training { .. }
            | Error::LinearAlgebra { .. }
            | Error::DegenerateNormalizer(_)
            | Error::UndefinedSimilarity
            | Error::Domain(_) => ErrorClass::Numeric,
            Error::Resource(_) | Error::Config(_) => ErrorClass::Usage,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
