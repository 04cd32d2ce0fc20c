use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("frame window of {window} samples exceeds 10x the signal length {signal}")]
    DegenerateWindow { window: usize, signal: usize },

    #[error("hop mismatch while fusing streams: {first} ms vs {other} ms")]
    HopMismatch { first: f64, other: f64 },

    #[error("annotation intervals overlap at {at_s} s")]
    OverlappingIntervals { at_s: f64 },

    #[error("frame {frame} (t = {time_s} s) is not covered by any annotation")]
    UncoveredFrame { frame: usize, time_s: f64 },

    #[error("unknown activity label {0:?}")]
    UnknownLabel(String),

    #[error("class {class} appears in targets but has zero training frames")]
    ZeroClassCount { class: usize },

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("unknown parameter tensor {0}")]
    UnknownTensor(String),

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("feature recipe mismatch: checkpoint expects {expected:?}, got {actual:?}")]
    RecipeMismatch { expected: Vec<String>, actual: Vec<String> },

    #[error("insufficient instructors: {available} available, {required} required")]
    InsufficientInstructors { available: usize, required: usize },

    #[error("session {0} has predictions but no annotations")]
    MissingAnnotations(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedAudio(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
