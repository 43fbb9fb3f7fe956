use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("no backward rule for op `{0}`")]
    UnsupportedBackward(String),

    #[error("loss must be a scalar, got shape {0}")]
    NotScalar(String),

    #[error("missing gradient for parameter {0}")]
    MissingGradient(usize),

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("weight file {path}: {detail}")]
    WeightFormat { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    Image { path: PathBuf, detail: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at step {step}: loss {loss}, gradient norm {grad_norm}")]
    Diverged { step: usize, loss: f64, grad_norm: f64 },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures caused by bad numerics rather than bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Diverged { .. })
    }
}
