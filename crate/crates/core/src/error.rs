use thiserror::Error;

/// Errors raised by the ranking library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A covariance factorization failed even after escalating the diagonal jitter.
    #[error("factorization failed: {context} (jitter levels tried: {jitters:?})")]
    Factorization { context: String, jitters: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("sampler failed at x = {x:?}, surface {surface}: {source}")]
    Sampler {
        x: Vec<f64>,
        surface: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Factorization { .. } | Error::Numerical(_) => true,
            Error::Sampler { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
