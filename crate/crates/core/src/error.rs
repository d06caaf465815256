use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    /// An argument is outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates one of its invariants.
    #[error("invalid parameter `{path}`: {reason}")]
    InvalidParameter { path: String, reason: String },

    /// Circuit description cannot be assembled.
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    /// The transient solver could not make progress.
    #[error("integration failed at t = {t:.6e} s: {reason}")]
    Integration { t: f64, reason: String },

    /// The named entity does not exist.
    #[error("unknown identifier `{0}`")]
    UnknownId(String),

    /// A value is outside the calibrated range of a behavioral model.
    #[error("{what} = {value:.4e} outside calibrated range [{lo:.4e}, {hi:.4e}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Failure reading or parsing a configuration file.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    pub(crate) fn param(path: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
