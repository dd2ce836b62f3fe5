use thiserror::Error;

/// Errors raised by the model, solvers and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation was called on inputs it is not defined for.
    #[error("invalid usage: {0}")]
    InvalidUsage(String),

    /// A solver or integrator failed to produce a usable result.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A diagnostic could not be evaluated at this point (e.g. log of zero).
    #[error("diagnostic unavailable: {0}")]
    DiagnosticUnavailable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
