//! Scenario construction, experiment drivers and CSV output.

mod config;
mod experiments;
mod scenario;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

use crate::aqm::AqmError;
use crate::predictor::PredictorError;
use crate::tuner::TunerError;

pub use config::{parse_entries, parse_override, ScenarioConfig, ScenarioKind};
pub use experiments::{
    compare_iaqm, obtain_predictor, pretrain_predictor, retrain_demo, target_sweep, write_compare_csv,
    write_fit_report_csv, write_retrain_csv, write_sweep_csv, CompareRow, RetrainOutcome, SweepPoint,
    DEFAULT_SWEEP_TARGETS_US, RETRAIN_BIN, RETRAIN_WINDOW,
};
pub use scenario::{
    base_rtt, reward_normalizer, run_scenario, write_epochs_csv, write_outcome, write_summary_csv, EpochRow,
    ScenarioOutcome, Summary,
};
pub use stats::{mean, spearman};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config key '{key}': {msg}")]
    Config { key: String, msg: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Aqm(#[from] AqmError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
