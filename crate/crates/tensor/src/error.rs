use thiserror::Error;

pub type Result<T> = std::result::Result<T, TensorError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },

    #[error("index {index} out of range for extent {extent} in {op}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        extent: usize,
    },

    #[error("invalid argument to {op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },

    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalarLoss(Vec<usize>),

    #[error("malformed archive: {0}")]
    Archive(String),
}
