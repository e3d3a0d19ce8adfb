//! Training driver, evaluation protocol, trajectory export and the
//! variant × curriculum comparison grid.

mod compare;
mod config;
mod eval;
mod export;
mod rollout;
mod train;

pub use compare::{compare, grid_configs, write_compare_report, CompareRow, GridOptions};
pub use config::TrainConfig;
pub use eval::{eval_episode_seed, evaluate, evaluate_controller, EvalReport, SessionReport};
pub use export::{export_trajectory, render_svg, write_trajectory_csv, ExportPaths};
pub use rollout::{
    observe, run_episode, Controller, EpisodeEnd, EpisodeTrace, PolicyController,
    ScriptedController, StepRecord,
};
pub use train::{episode_seed, train, train_with, EpisodeMetrics, TrainSummary, Trainer};

use std::path::PathBuf;

use thiserror::Error;

use crate::observation::ObservationError;
use crate::sac::{CheckpointError, SacError};
use crate::simworld::SimError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Observation(#[from] ObservationError),
    #[error("checkpoint carries no run config; cannot rebuild the observation pipeline")]
    MissingRunConfig,
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
