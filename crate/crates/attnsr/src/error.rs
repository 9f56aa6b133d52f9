use std::path::PathBuf;

/// Unified error type for tensor ops, model I/O, and the CLI pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two tensors (or a tensor and an expected geometry) disagree in shape.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// An argument is structurally invalid (zero dimension, bad scale, ...).
    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    /// A checkpoint file failed to parse or verify.
    #[error("invalid checkpoint {path}: {detail}")]
    InvalidCheckpoint { path: PathBuf, detail: String },

    /// A run-config or manifest file failed to parse or validate.
    #[error("invalid config {path}: {detail}")]
    InvalidConfig { path: PathBuf, detail: String },

    /// Training diverged (non-finite loss) and was aborted.
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: u64 },

    /// An image could not be decoded or encoded.
    #[error("image error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Plain I/O failure, annotated with the path involved.
    #[error("io error for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for a [`Error::ShapeMismatch`] with formatted detail.
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    /// Shorthand for an [`Error::InvalidArgument`] with formatted detail.
    pub fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            detail: detail.into(),
        }
    }

    /// Wrap an I/O error with the file it concerns.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
