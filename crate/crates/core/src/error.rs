use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rejected input: {0}")]
    InvalidInput(String),

    #[error("value {value} outside domain ({lower}, {upper})")]
    Domain { value: f64, lower: f64, upper: f64 },

    #[error("enumeration of 2^{n} states refused (limit is n <= {limit})")]
    EnumerationLimit { n: usize, limit: usize },

    #[error("matrix is singular or ill-conditioned (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("noise density vanishes at point {index} of the {which} sample")]
    SupportViolation { which: &'static str, index: usize },

    #[error("model does not provide {0}")]
    MissingCapability(&'static str),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("boosting stage {stage} failed ({reason}); {} experts fitted before the failure", .partial.len())]
    StageFailure {
        stage: usize,
        reason: String,
        /// Experts (and the last normalization value) fitted before the failing stage.
        partial: Vec<Vec<f64>>,
        c: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
