use thiserror::Error;

use crate::solvers::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch { expected: usize, actual: usize, context: &'static str },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("column {column} has norm {norm}, expected 1")]
    ColumnNotUnitNorm { column: usize, norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input within {margin:e} of a threshold manifold at group {group}, index {index}")]
    NearThreshold { group: usize, index: usize, margin: f64 },

    #[error("non-finite value at iterate {iterate}")]
    NonFinite { iterate: usize, trace: Vec<TraceRecord> },

    #[error("residual diverged at iterate {iterate}")]
    Diverged { iterate: usize, trace: Vec<TraceRecord> },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
