use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(PathBuf),
    #[error("camera pose is not rigid: {0}")]
    InvalidPose(String),
    #[error("failed to decode {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: u32,
        height: u32,
    },
    #[error("failed to write {path}: {reason}")]
    WriteError { path: PathBuf, reason: String },
    #[error("search radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("minimum distance {min_dist} exceeds index radius {radius}")]
    IndexTooCoarse { min_dist: f64, radius: f64 },
    #[error("shape mismatch: {0}")]
    InvalidShape(String),
    #[error("transform is not rigid: {0}")]
    InvalidTransform(String),
    #[error("direction is not unit length (norm {0})")]
    InvalidDirection(f64),
    #[error("cache does not match the current state: {0}")]
    InvalidCache(String),
    #[error("ray direction is degenerate")]
    InvalidRay,
    #[error("negative density {0}")]
    InvalidDensity(f64),
    #[error("non-finite position gradient at particle {0}")]
    InvalidGradient(usize),
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
