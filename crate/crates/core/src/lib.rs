//! Toolkit for unique-optimum activity-scheduling and longest-increasing-
//! subsequence tasks: seeded instance generation with exact uniqueness
//! certificates, prompt rendering, free-form response parsing, verifiable
//! reward functions, Pass@k / self-consistency evaluation, and sorting /
//! feature analyses over response corpora.

pub mod analyze;
pub mod domain;
pub mod error;
pub mod generate;
pub mod metrics;
pub mod parse;
pub mod prompt;
pub mod reward;

pub use domain::{
    ActivityInstance, Candidate, CandidateMethod, DatasetRecord, GroundTruth, Instance,
    LisInstance, ParsedOutput, RecordRow, ResponseSet, RewardKind, RewardSpec, Task,
};
pub use error::{Error, Result};
