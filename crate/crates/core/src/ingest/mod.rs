//! Mask and raster file formats, mask geometry and 2D track assembly.

mod mask;
mod ppm;
mod track;

pub use mask::*;
pub use ppm::*;
pub use track::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("run lengths sum to {got}, expected {expected}")]
    LengthMismatch { expected: u64, got: u64 },
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("mask sequence has {got} frames, expected {expected}")]
    FrameCountMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid metadata: {0}")]
    InvalidMeta(String),
    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| IngestError::Json { path: path.display().to_string(), source })
}

pub(crate) fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<(), IngestError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}
