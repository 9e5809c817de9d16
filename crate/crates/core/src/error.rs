use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sigmoid fit did not converge after {iterations} iterations (rss = {rss:.3e}, params = {params:?})")]
    FitFailure {
        iterations: usize,
        rss: f64,
        params: Vec<f64>,
    },

    #[error("resonance pattern is not monotone in threshold: {pattern:?}")]
    AmbiguousPattern { pattern: Vec<bool> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable category, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::FitFailure { .. } => "fit-failure",
            Error::AmbiguousPattern { .. } => "ambiguous-result",
        }
    }
}
