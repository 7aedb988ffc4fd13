use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FpmError> = std::result::Result<T, E>;

/// Everything that can go wrong in the simulation, reconstruction and
/// dataset pipeline.
///
/// The variants are grouped so callers (the CLI in particular) can map them
/// onto coarse failure classes with [`FpmError::class`].
#[derive(Debug, Error)]
pub enum FpmError {
    #[error("non-finite value at pixel ({x}, {y})")]
    NonFinite { x: usize, y: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("NaN encountered during sweep {sweep}")]
    Diverged { sweep: usize },

    #[error("bad magic in cube file")]
    BadMagic,

    #[error("unsupported cube format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated cube file: {0}")]
    Truncated(String),

    #[error("checksum mismatch: header says {expected:#018x}, payload hashes to {found:#018x}")]
    Checksum { expected: u64, found: u64 },

    #[error("malformed cube metadata: {0}")]
    Metadata(#[from] serde_json::Error),

    #[error("cube is already upsampled")]
    AlreadyUpsampled,

    #[error("image decode failed for {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Io,
    Validation,
    Numerical,
}

impl FpmError {
    pub fn class(&self) -> ErrorClass {
        match self {
            FpmError::Io { .. }
            | FpmError::BadMagic
            | FpmError::VersionMismatch { .. }
            | FpmError::Truncated(_)
            | FpmError::Checksum { .. }
            | FpmError::Metadata(_)
            | FpmError::Decode { .. }
            | FpmError::Csv(_) => ErrorClass::Io,
            FpmError::NonFinite { .. } | FpmError::Diverged { .. } => ErrorClass::Numerical,
            FpmError::Shape(_)
            | FpmError::Geometry(_)
            | FpmError::Invalid(_)
            | FpmError::AlreadyUpsampled => ErrorClass::Validation,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FpmError::Io {
            path: path.into(),
            source,
        }
    }
}
