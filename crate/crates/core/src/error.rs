use thiserror::Error;

#[derive(Debug, Error)]
pub enum CdqcError {
    /// Mismatched qubit counts, string lengths or vector dimensions.
    #[error("structural error: {0}")]
    Structure(String),

    /// Dense cap or term budget exceeded.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Inputs that violate a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("parse error at line {line}: {msg}")]
    ParseAt { line: usize, msg: String },

    /// A computed quantity left its physically admissible range.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Propagation finished but the norm drifted past tolerance.
    #[error("invalid trace: norm drift {norm_drift:e} exceeds {limit:e}")]
    InvalidTrace { norm_drift: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CdqcError>;
