use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point is within {distance:e} of the singular set")]
    Singularity { distance: f64 },
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("evaluation produced a non-finite value at {0}")]
    NonFinite(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Config and regime errors are user-facing input problems; everything
    /// else is a compute failure.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Regime(_) | Error::Domain(_))
    }
}
