//! Crate-wide error type.

use crate::domain::Task;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown id {id}: not present in the instance")]
    UnknownId { id: u32 },

    #[error("candidate id {id} does not appear in the reference order")]
    CandidateIdNotInReference { id: u32 },

    #[error("input sequence is empty")]
    EmptyInput,

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("minutes value {minutes} outside 0..1440")]
    TimeOutOfRange { minutes: u32 },

    #[error("task mismatch: expected {expected}, got {got}")]
    TaskMismatch { expected: Task, got: Task },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no acceptable instance found for seed {seed} within {tries} tries")]
    GenerationFailed { seed: u64, tries: u32 },

    #[error("instance has {rows} rows, exhaustive enumeration is capped at {cap}")]
    TooManyRows { rows: usize, cap: usize },

    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("got {sets} response sets but {truths} ground truths")]
    LengthMismatch { sets: usize, truths: usize },

    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),

    #[error("need at least 2 values, got {n}")]
    TooFewValues { n: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
