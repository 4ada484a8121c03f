use thiserror::Error;

use crate::conll::ConllError;
use crate::syntax::SyntaxError;
use synsrl_tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Conll(#[from] ConllError),

    #[error(transparent)]
    Syntax(#[from] SyntaxError),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("positional embedding width {0} is odd")]
    OddWidth(usize),

    #[error("logits contain a non-finite value at token {token}")]
    NonFiniteLogits { token: usize },

    #[error("target {target} outside 0..{classes}")]
    TargetOutOfRange { target: usize, classes: usize },

    #[error("{vocab} vocabulary: {reason}")]
    Vocab { vocab: String, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}
