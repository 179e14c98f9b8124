use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller broke a shape or argument contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {location}")]
    Numeric { location: String },

    #[error("unsupported operation `{0}` in loss graph")]
    UnsupportedOp(String),

    #[error("invalid network configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    /// Reading a file written with a different or unknown format version.
    #[error("format error: {0}")]
    Format(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("training aborted at iteration {iter}: non-finite {term}")]
    TrainingAborted { iter: usize, term: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numeric(location: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
        }
    }
}
