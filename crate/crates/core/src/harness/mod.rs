//! Experiment orchestration: configuration, single training runs, paired
//! EECL-vs-baseline comparisons, CSV output, plotting and checkpoints.

pub mod checkpoint;
mod compare;
mod config;
mod curve;
mod plot;
mod run;

use std::path::PathBuf;

pub use compare::{
    aggregate, convergence_step, run_comparison, ArmSummary, ComparisonReport, ComparisonRow,
    SeedOutcome,
};
pub use config::{load_config, parse_config, RunConfig};
pub use curve::{CurveRecord, LearningCurve};
pub use plot::{emit_plot, moving_average, render_svg, PlotSeries, SMOOTHING_WINDOW};
pub use run::{run_training, train, NoveltyMode, RunOutput};

use crate::eecl::EeclError;
use crate::envs::EnvError;
use crate::td3::AgentError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config file not found: {}", path.display())]
    ConfigMissing { path: PathBuf },
    #[error("malformed config {}: {message}", path.display())]
    ConfigSyntax { path: PathBuf, message: String },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("config value out of range: `{field}` {message}")]
    OutOfRange { field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("checkpoint {}: unsupported version {found} (expected {expected})", path.display())]
    CheckpointVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("checkpoint {}: corrupt file: {message}", path.display())]
    CheckpointCorrupt { path: PathBuf, message: String },
    #[error("checkpoint {network} shape mismatch: expected {expected:?}, found {found:?}")]
    CheckpointShape {
        network: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("comparison requires a novelty (`[eecl]`) configuration")]
    MissingNovelty,
    #[error("runs disagree on evaluation steps; cannot aggregate")]
    MisalignedCurves,
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Novelty(#[from] EeclError),
}

impl HarnessError {
    /// Errors a user fixes by editing configuration or flags.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Self::ConfigMissing { .. }
                | Self::ConfigSyntax { .. }
                | Self::UnknownKey { .. }
                | Self::OutOfRange { .. }
                | Self::MissingNovelty
                | Self::Env(EnvError::UnknownEnv(_))
                | Self::Agent(AgentError::InvalidParameter { .. })
                | Self::Novelty(EeclError::InvalidParameter { .. })
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
