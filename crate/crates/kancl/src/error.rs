//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Error, Debug)]
pub enum KanError {
    #[error("shape mismatch in {op}: left {left:?}, right {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("basis derivative requires spline order >= 1 (got k = 0)")]
    UnsupportedOrder,

    #[error("coefficient length {got} does not match basis count {expected}")]
    CoefficientLength { expected: usize, got: usize },

    #[error("non-finite values produced by {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("label {0} out of range 0..{1}")]
    LabelOutOfRange(u8, u8),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, KanError>;
