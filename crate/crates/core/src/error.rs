use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("{0}: recording has no samples")]
    EmptyRecording(PathBuf),

    #[error("{path}: timestamps not strictly increasing at row {row}")]
    NonMonotoneTimestamps { path: PathBuf, row: usize },

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("duplicate window index {0}")]
    DuplicateWindow(u32),

    #[error("subject mismatch: recording {recording:?}, annotations {annotations:?}")]
    SubjectMismatch {
        recording: String,
        annotations: String,
    },

    #[error("no window survives the data-sufficiency rule")]
    EmptyDataset,

    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),

    #[error("signal too short: {len} samples, need more than {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("wavelet decomposition too deep: level {level} input has {len} samples")]
    DecompositionTooDeep { level: usize, len: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("feature {index} is not finite")]
    FeatureComputationFailed { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("invalid training options: {0}")]
    InvalidOptions(String),

    #[error("insufficient training data for {kind}: {count} windows")]
    InsufficientTrainingData { kind: String, count: usize },

    #[error("layout version mismatch: model {model:?}, data {data:?}")]
    LayoutMismatch { model: String, data: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("fold {fold} failed: {source}")]
    Fold {
        fold: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 data/validation, 2 configuration/compatibility, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::LayoutMismatch { .. } | Error::InvalidOptions(_) => 2,
            Error::NumericalBreakdown(_) | Error::FeatureComputationFailed { .. } => 3,
            Error::Fold { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
