//! Experiment runner for `wbc-core`: model and config files, the noise,
//! update-ratio and frequency sweeps, gain tuning, ratio selection, and CSV,
//! SVG and manifest output.

use std::path::PathBuf;

use wbc_core::sim::SimError;

pub mod clock;
pub mod config;
pub mod experiments;
pub mod manifest;
pub mod model_file;
pub mod output;
pub mod reference;
pub mod svg;
pub mod tuning;

pub use clock::{ClockKind, WallClock};
pub use experiments::{ExperimentKind, ExperimentPlan};
pub use model_file::ModelFileError;
pub use tuning::{Scenario, StandardScenario};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    ModelFile { path: PathBuf, source: ModelFileError },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid experiment plan: {0}")]
    Plan(String),
    #[error("simulation aborted: {0}")]
    Sim(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("gain tuning failed at f = {f} Hz: every trial run aborted")]
    TunerFailed { f: f64 },
}

impl BenchError {
    /// Process exit code: 2 for bad input, 3 for a simulation abort, 1 for IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Plan(_) | BenchError::ModelFile { .. } => 2,
            BenchError::Sim(_) | BenchError::TunerFailed { .. } => 3,
            BenchError::Io { .. } | BenchError::Csv { .. } => 1,
        }
    }
}
