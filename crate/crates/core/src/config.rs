//! The pipeline configuration file.
//!
//! One JSON or TOML document holds the settings of every stage. Missing
//! sections and fields take their defaults. The configuration hash, embedded
//! in every artifact sidecar, is the SHA-256 of the canonical JSON form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CleaningConfig, Source};
use crate::datasets::SplitFractions;
use crate::instances::InstanceConfig;
use crate::mixing::{DEFAULT_CHUNK_TOKENS, DEFAULT_TOLERANCE};
use crate::tinylm::{OptimizerConfig, TinyLMConfig};
use crate::vocab::VocabTrainerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Input files per corpus source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputPaths {
    pub general: Vec<PathBuf>,
    pub biomedical: Vec<PathBuf>,
    pub radiology_theses: Vec<PathBuf>,
    pub clinical_reports: Vec<PathBuf>,
}

impl InputPaths {
    pub fn for_source(&self, source: Source) -> &[PathBuf] {
        match source {
            Source::General => &self.general,
            Source::Biomedical => &self.biomedical,
            Source::RadiologyTheses => &self.radiology_theses,
            Source::ClinicalReports => &self.clinical_reports,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingConfig {
    pub chunk_tokens: usize,
    pub target_ratio: f64,
    pub tolerance: f64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        MixingConfig {
            chunk_tokens: DEFAULT_CHUNK_TOKENS,
            target_ratio: 1.0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Model dimensions; the vocabulary size comes from the vocabulary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
    pub init_std: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let d = TinyLMConfig::desk(crate::vocab::NUM_SPECIALS as usize + 1);
        ModelSettings {
            layers: d.layers,
            hidden: d.hidden,
            heads: d.heads,
            ffn: d.ffn,
            max_seq_len: d.max_seq_len,
            dropout: d.dropout,
            init_std: d.init_std,
        }
    }
}

impl ModelSettings {
    pub fn to_config(&self, vocab_size: usize) -> TinyLMConfig {
        TinyLMConfig {
            layers: self.layers,
            hidden: self.hidden,
            heads: self.heads,
            ffn: self.ffn,
            max_seq_len: self.max_seq_len,
            dropout: self.dropout,
            init_std: self.init_std,
            ..TinyLMConfig::desk(vocab_size)
        }
    }
}

/// Optimizer fields given in a file; the rest come from a stage-specific base.
#[derive(Deserialize)]
struct OptimizerOverrides {
    learning_rate: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    warmup_steps: Option<u64>,
    batch_size: Option<usize>,
}

impl OptimizerOverrides {
    fn over(self, base: OptimizerConfig) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            beta1: self.beta1.unwrap_or(base.beta1),
            beta2: self.beta2.unwrap_or(base.beta2),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            warmup_steps: self.warmup_steps.unwrap_or(base.warmup_steps),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
        }
    }
}

fn pretrain_optimizer<'de, D: serde::Deserializer<'de>>(d: D) -> Result<OptimizerConfig, D::Error> {
    Ok(OptimizerOverrides::deserialize(d)?.over(OptimizerConfig::pretrain()))
}

fn fine_tune_optimizer<'de, D: serde::Deserializer<'de>>(d: D) -> Result<OptimizerConfig, D::Error> {
    Ok(OptimizerOverrides::deserialize(d)?.over(OptimizerConfig::fine_tune()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainSettings {
    #[serde(deserialize_with = "pretrain_optimizer")]
    pub optimizer: OptimizerConfig,
    pub steps: u64,
}

impl Default for PretrainSettings {
    fn default() -> Self {
        PretrainSettings {
            optimizer: OptimizerConfig::pretrain(),
            steps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneSettings {
    #[serde(deserialize_with = "fine_tune_optimizer")]
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub threshold: f64,
}

impl Default for FineTuneSettings {
    fn default() -> Self {
        FineTuneSettings {
            optimizer: OptimizerConfig::fine_tune(),
            epochs: 3,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub inputs: InputPaths,
    pub cleaning: CleaningConfig,
    pub vocab: VocabTrainerConfig,
    pub mixing: MixingConfig,
    pub instances: InstanceConfig,
    /// Dupe factor used instead of `instances.dupe_factor` in task-adaptive mode.
    pub task_adaptive_dupe_factor: usize,
    pub split: SplitFractions,
    pub model: ModelSettings,
    pub pretrain: PretrainSettings,
    pub finetune: FineTuneSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 12345,
            inputs: InputPaths::default(),
            cleaning: CleaningConfig::default(),
            vocab: VocabTrainerConfig::default(),
            mixing: MixingConfig::default(),
            instances: InstanceConfig::default(),
            task_adaptive_dupe_factor: 10,
            split: SplitFractions::default(),
            model: ModelSettings::default(),
            pretrain: PretrainSettings::default(),
            finetune: FineTuneSettings::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a `.toml` file, or JSON for any other extension.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parsed = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable config")
    }

    pub fn hash(&self) -> String {
        crate::sha256_hex(&serde_json::to_vec(self).expect("serializable config"))
    }
}
