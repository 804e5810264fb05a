use std::path::{Path, PathBuf};

use skintemp_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ROI out of bounds: {coordinate} = {value} exceeds frame limit {limit}")]
    Bounds {
        coordinate: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("insufficient data for {what}: need at least {needed}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("time {t} s outside labeled span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("subject {subject}: saturation {saturation:.4} at t = {time} s leaves [0.02, 0.98]")]
    Profile {
        subject: String,
        time: f64,
        saturation: f64,
    },

    #[error("length mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    EmptyData(&'static str),

    #[error("training diverged: non-finite loss at batch {batch}")]
    Divergence { batch: usize },

    #[error("split error: {0}")]
    Split(String),

    #[error("data leak: {0}")]
    Leak(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl ToString) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
