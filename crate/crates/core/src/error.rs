use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("camera pose is below the terrain surface")]
    PoseBelowTerrain,

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("no depth available: {0}")]
    NoDepth(String),

    #[error("empty mask")]
    EmptyMask,

    #[error("dataset needs both labels and at least {min} samples, got {got}")]
    BadDataset { min: usize, got: usize },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("infeasible wind: along-track airspeed {numerator:.3} m/s is not positive")]
    InfeasibleWind { numerator: f64 },

    #[error("no grass-labeled mask for region {0}")]
    NoGrassMask(u64),

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
