//! Library side of the `wrs` command: configuration, offline simulation,
//! benchmarking and the frame source shared by both.

pub mod bench;
pub mod config;
pub mod frames;
pub mod simulate;

pub use bench::{bench, BenchReport, WARMUP_FRAMES};
pub use config::{MethodChoice, Overrides, RunConfig, ScanpathSource};
pub use frames::Frames;
pub use simulate::{frame_hash, simulate, Manifest, SimulateOutput};

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {detail}")]
    Config { field: String, detail: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(field: &str, detail: impl ToString) -> Self {
        CliError::Config {
            field: field.to_string(),
            detail: detail.to_string(),
        }
    }

    pub fn runtime(detail: impl ToString) -> Self {
        CliError::Runtime(detail.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}
