use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, perception and planning stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid depth {0} (must be finite and positive)")]
    InvalidDepth(f64),

    #[error("pixel ({row}, {col}) outside {width}x{height} image")]
    PixelOutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("height map requires a camera looking straight down")]
    WrongCamera,

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid push: {0}")]
    InvalidPush(String),

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image encoding failed: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
