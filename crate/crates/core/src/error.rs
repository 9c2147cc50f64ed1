use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("rating label {label} out of range for {n} classes")]
    LabelOutOfRange { label: usize, n: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no nonempty rating class to sample from")]
    NoNonemptyClass,
    #[error("no trainable pairs")]
    NoTrainablePairs,
    #[error("missing ground-truth return")]
    MissingGroundTruth,
    #[error("invalid action id {0}")]
    InvalidAction(usize),
    #[error("invalid state id {0}")]
    InvalidState(usize),
    #[error("buffer too small: {0}")]
    BufferTooSmall(String),
    #[error("budget exhausted")]
    BudgetExhausted,
    #[error("teacher unavailable after {attempts} attempts (last response: {last_response:?})")]
    TeacherUnavailable {
        attempts: usize,
        last_response: Option<String>,
    },
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid task: {0}")]
    Task(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("http: {0}")]
    Http(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
