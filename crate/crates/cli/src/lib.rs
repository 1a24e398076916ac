//! Library side of the `fpsketch` command: stream files, the exact oracle,
//! estimation runs and timing sweeps. `main.rs` only parses flags.

pub mod commands;
pub mod stream;

use fpsketch::SketchError;
use thiserror::Error;

pub use commands::{bench, estimate, generate, oracle, BenchArgs, BenchRow, EstimateArgs, EstimateRecord, GenArgs, OracleResult};
pub use stream::{Format, Header, StreamFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error("every instance failed")]
    AllInstancesFailed,

    #[error(transparent)]
    Sketch(SketchError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Output(#[from] csv::Error),
}

impl From<SketchError> for CliError {
    fn from(e: SketchError) -> Self {
        match e {
            SketchError::AllInstancesFailed => CliError::AllInstancesFailed,
            SketchError::Parse { line, msg } => CliError::Parse { line, msg },
            other => CliError::Sketch(other),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    /// 3 when every instance failed, 2 for everything else (bad input,
    /// bad parameters, I/O).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::AllInstancesFailed => 3,
            _ => 2,
        }
    }
}
