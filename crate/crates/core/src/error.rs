use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box {0:?}: width and height must be positive")]
    InvalidBox([u32; 4]),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("feature dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },

    #[error("no content: {0}")]
    NoContent(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("layout error in block {block} ({kind}): {reason}")]
    Layout {
        block: usize,
        kind: &'static str,
        reason: String,
    },

    #[error("page `{0}` has no counterpart in the ground truth")]
    UnknownPage(String),

    #[error("page `{0}` has ground truth but no detections")]
    MissingPage(String),

    #[error("malformed annotation {path}: {message}")]
    Annotation { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("cannot encode image: {0}")]
    Encode(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
