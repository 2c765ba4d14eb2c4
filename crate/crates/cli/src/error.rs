use std::path::PathBuf;

use radmix::config::ConfigError;
use radmix::corpus::IngestError;
use radmix::datasets::{DatasetError, EvalError};
use radmix::instances::{InstanceError, RecordError};
use radmix::mixing::MixError;
use radmix::tinylm::ModelError;
use radmix::vocab::{TrainError, VocabError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("vocabulary training failed: {0}")]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Vocab {
        path: PathBuf,
        #[source]
        source: VocabError,
    },
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// Short machine-readable category for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Ingest(_) => "ingest",
            CliError::Train(_) => "vocab-train",
            CliError::Vocab { .. } => "vocab",
            CliError::Mix(_) => "mix",
            CliError::Instance(_) => "instances",
            CliError::Record(_) => "records",
            CliError::Dataset(_) => "dataset",
            CliError::Eval(_) => "eval",
            CliError::Model(_) => "model",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Invalid(_) => "invalid-input",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
