//! Error type shared by every module in the crate.

use std::fmt;

/// Crate-wide error enum.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A caller violated an operation precondition.
    InvalidArgument(String),
    /// Tensor shapes do not line up for the requested operation.
    ShapeMismatch { op: &'static str, detail: String },
    /// A configuration is internally inconsistent (detected before any work starts).
    Config(String),
    /// A numerical routine hit a state it cannot recover from
    /// (singular matrix, non-finite loss, degenerate denominator).
    Numerical(String),
    /// Dataset ingestion failure.
    Data(String),
    /// Underlying I/O failure, stringified to keep the enum cloneable.
    Io(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        CoreError::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            CoreError::ShapeMismatch { op, detail } => {
                write!(f, "shape mismatch in {op}: {detail}")
            }
            CoreError::Config(msg) => write!(f, "configuration error: {msg}"),
            CoreError::Numerical(msg) => write!(f, "numerical error: {msg}"),
            CoreError::Data(msg) => write!(f, "data error: {msg}"),
            CoreError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CoreError {}

impl From<std::io::Error> for CoreError {
    fn from(err: std::io::Error) -> Self {
        CoreError::Io(err.to_string())
    }
}
