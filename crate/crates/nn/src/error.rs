use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Shape {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("{0}: backward called without a recorded forward pass")]
    NoForward(String),

    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn shape_err(context: impl Into<String>, expected: &[usize], actual: &[usize]) -> NnError {
    NnError::Shape {
        context: context.into(),
        expected: expected.to_vec(),
        actual: actual.to_vec(),
    }
}
