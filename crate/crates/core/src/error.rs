use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("time {t} s outside schedule [0, {end})")]
    OutOfRange { t: f64, end: f64 },

    #[error("no resonance found: {0}")]
    NoResonance(String),

    #[error("fit did not converge after {iterations} iterations (chi2 = {chi2:.6e}, reduced = {reduced_chi2:.4})")]
    NonConvergence {
        iterations: usize,
        chi2: f64,
        reduced_chi2: f64,
    },

    #[error("fit parameter `{0}` ended at its bound")]
    ParameterAtBound(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("integrator step {step:.3e} s exceeds stability limit {limit:.3e} s")]
    StepTooLarge { step: f64, limit: f64 },

    #[error("stream and schedule do not match: {0}")]
    Mismatch(String),

    #[error("empty data: {0}")]
    Empty(String),

    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
