//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A constructor argument is outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation was evaluated outside its mathematical domain
    /// (e.g. quantile of 0, raw score at the open endpoint).
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid-based operation received no evaluation points.
    #[error("empty evaluation grid")]
    EmptyGrid,

    /// The population's group/region structure does not match what the
    /// operation requires.
    #[error("population structure: {0}")]
    Structure(String),

    /// A (group, region) cell referenced by thresholds or replay is absent.
    #[error("missing cell ({group}, {region})")]
    MissingCell { group: String, region: String },

    /// Capacity is inconsistent with the applicant pool.
    #[error("capacity: {0}")]
    Capacity(String),

    /// The requested quota multiplier cannot be met by the pool.
    #[error("infeasible quota: {0}")]
    InfeasibleQuota(String),

    /// The instance is valid but outside the setting an operation supports.
    #[error("unsupported setting: {0}")]
    UnsupportedSetting(String),

    /// An iterative scheme exhausted its budget.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// Semantic validation of parsed data failed.
    #[error("validation: {0}")]
    Validation(String),

    /// Input bytes could not be decoded into the expected schema.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
