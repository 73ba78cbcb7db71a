use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("point coincides with the sensor origin")]
    ZeroRange,

    #[error("no structure: {0}")]
    NoStructure(&'static str),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("modulation schedule does not alternate")]
    NonAlternating,

    #[error("insufficient Doppler support: {usable} usable measurements, need {required}")]
    InsufficientSupport { usable: usize, required: usize },

    #[error("degenerate geometry: bearing coverage {span:.3} rad is below {required:.3} rad")]
    DegenerateGeometry { span: f64, required: f64 },

    #[error("flat score vector")]
    FlatScores,

    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
