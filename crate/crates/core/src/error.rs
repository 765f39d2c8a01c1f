use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("input vectors are all zero")]
    ZeroInput,
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("rank deficiency: expected rank {expected}, found {found}")]
    RankDeficient { expected: usize, found: usize },
    #[error("vector is not in the subspace (residual {residual:.3e})")]
    NotInSubspace { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("implication audit failed: {0}")]
    AuditViolation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
