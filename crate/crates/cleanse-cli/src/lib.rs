//! Experiment driver for training-set cleansing: configuration, multi-seed
//! execution, and the post-hoc analyses behind the removal-pattern,
//! loss-comparison, instance-characteristic, solution-quality, energy and
//! timing outputs.

pub mod analysis;
pub mod config;
pub mod experiment;
pub mod report;

use thiserror::Error;

/// Errors split by exit code: configuration problems exit with 1, runtime
/// failures with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
