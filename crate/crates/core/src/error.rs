use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The CLI maps `Contract`, `Domain`, `Format` and `Io` to exit code 1; a
/// failed numerical check is reported separately and never surfaces here.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument outside the operation's domain (non-positive
    /// depth, non-unit direction, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A point at or behind the camera plane was projected.
    #[error("point is behind the camera (camera z = {z})")]
    BehindCamera { z: f64 },

    /// Caller violated a precondition: shape mismatch, bad schedule input.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed file contents.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// A checkpoint written by a newer or unknown format revision.
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u8, expected: u8 },

    /// Invalid synthetic scene description.
    #[error("invalid scene spec: {0}")]
    Spec(String),

    /// The optimizer produced a non-finite loss.
    #[error("non-finite loss at iteration {iteration}: {snapshot}")]
    NonFinite { iteration: usize, snapshot: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
