use thiserror::Error;

use crate::session::DetectorId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("session has no records")]
    EmptySession,
    #[error("malformed record{}: {reason}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    MalformedRecord { line: Option<usize>, reason: String },
    #[error("session of {duration} s holds no complete window of {tau} s")]
    NoCompleteWindow { duration: f64, tau: f64 },
    #[error("requested rate {requested}/s exceeds detector {detector} nominal rate {nominal}/s")]
    RateTooHigh {
        detector: DetectorId,
        requested: f64,
        nominal: f64,
    },
    #[error("window on detector {detector} holds {actual} of {expected} expected samples")]
    UnderfilledWindow {
        detector: DetectorId,
        actual: usize,
        expected: usize,
    },
    #[error("window of {len} samples is too short for {bins} spectrum bins")]
    WindowTooShort { len: usize, bins: usize },
    #[error("insufficient calibration data: {0}")]
    InsufficientCalibration(String),
    #[error("detector mismatch: {0}")]
    DetectorMismatch(String),
    #[error("series are not aligned on a common time grid: {0}")]
    AlignmentRequired(String),
    #[error("malformed feature: {0}")]
    MalformedFeature(String),
    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn malformed(reason: impl Into<String>) -> Self {
        Error::MalformedRecord {
            line: None,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidParameter(reason.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
