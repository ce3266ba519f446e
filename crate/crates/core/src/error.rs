use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("non-hourly gap; missing timestamps: {}", .missing.join(", "))]
    Gap { missing: Vec<String> },

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("empty region mask for {region}: increase the buffer (currently {buffer} cells)")]
    EmptyMask { region: String, buffer: f64 },

    #[error("capacity coverage: {0}")]
    Capacity(String),

    #[error("manifest error: {0}")]
    Manifest(String),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CoreError::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
