//! Scenario runner: loads JSON scenario files, runs one action per file and writes
//! per-scenario outputs.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod output;
pub mod run;
pub mod scenario;

use thiserror::Error;

pub use run::{run_file, Outcome, RunOptions};
pub use scenario::{Action, Scenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("build error: {0}")]
    Build(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("snapshot time {t} is outside the run [0, {end}]")]
    TimeOutOfRange { t: f64, end: f64 },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Schema(_) | Self::Build(_) | Self::Io(_) | Self::TimeOutOfRange { .. } => EXIT_INPUT_ERROR,
            Self::Run(_) => EXIT_CHECK_FAILED,
        }
    }
}
