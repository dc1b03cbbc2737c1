//! End-to-end orchestration and report emission.

mod bundle;
mod config;
mod pipeline;

use thiserror::Error;

pub use bundle::{sha256_file, Bundle};
pub use config::{FitGrids, RunConfig};
pub use pipeline::{
    analyze, cmd_correlate, cmd_run, cmd_stats, cmd_synth, load_inputs, sources_per_value, Analysis,
    OverlapEntry, TemporalFit, ZmFitEntry, VERSION,
};

#[derive(Debug, Error)]
pub enum ReportError {
    /// Bad flags, configuration or missing inputs.
    #[error("{0}")]
    Usage(String),
    /// A pipeline stage failed on otherwise valid configuration.
    #[error("{stage}: {msg}")]
    Stage { stage: &'static str, msg: String },
}

impl ReportError {
    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self::Stage {
            stage,
            msg: err.to_string(),
        }
    }

    /// Process exit code: 2 for usage/configuration, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Stage { .. } => 1,
        }
    }
}
