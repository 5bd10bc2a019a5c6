//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes are inconsistent with the requested operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A softmax row has no unmasked entry.
    #[error("degenerate mask: row {row} is fully masked")]
    DegenerateMask { row: usize },

    /// Model / plan configuration violates a documented precondition.
    #[error("config error: {0}")]
    Config(String),

    /// Token-grid geometry is incompatible with a 2x2 window operation.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Token count is not divisible by the requested compression ratio.
    #[error("budget error: {0}")]
    Budget(String),

    /// Weight-file bytes do not parse as the UHDW format.
    #[error("weight format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
