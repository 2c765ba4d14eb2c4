//! A small BERT-style encoder trained on the pipeline's own record files.
//!
//! Everything runs in `f64` on the CPU with hand-written backward passes.
//! Sequences are processed one at a time after trailing padding is cut off,
//! so padded positions cannot reach the outputs and results do not depend on
//! how sequences are grouped into batches. Per-sequence gradients are summed
//! in batch order, which keeps training bit-reproducible with any number of
//! worker threads.

mod checkpoint;
mod gradcheck;
mod model;
mod params;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{grad_check, GradCheckReport, Objective};
pub use model::{
    forward, multilabel_loss, multilabel_loss_and_grad, pretrain_loss, pretrain_loss_and_grad,
    LossParts, SequenceOutputs,
};
pub use params::ParameterSet;
pub use train::{
    batch_indices, encode_report, fine_tune_multilabel, loss_curve_csv, predict, pretrain,
    Adam, FineTuneExample, LossRow, OptimizerConfig, TrainState,
};

use crate::datasets::NUM_LABELS;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("vocabulary hash mismatch: model expects {expected}, input has {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyLMConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
    /// Size of the position table and the longest accepted sequence.
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub dropout: f64,
    pub num_labels: usize,
    /// Standard deviation of the truncated-normal weight initializer.
    pub init_std: f64,
}

impl TinyLMConfig {
    /// Desk-scale defaults for a given vocabulary.
    pub fn desk(vocab_size: usize) -> Self {
        TinyLMConfig {
            layers: 2,
            hidden: 64,
            heads: 2,
            ffn: 256,
            max_seq_len: 128,
            vocab_size,
            dropout: 0.1,
            num_labels: NUM_LABELS,
            init_std: 0.02,
        }
    }

    /// BERT-base dimensions. Accepted by the implementation, impractical to train here.
    pub fn base(vocab_size: usize) -> Self {
        TinyLMConfig {
            layers: 12,
            hidden: 768,
            heads: 12,
            ffn: 3072,
            max_seq_len: 512,
            ..Self::desk(vocab_size)
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.ffn == 0 {
            return bad("layers, hidden, heads and ffn must be positive");
        }
        if self.hidden % self.heads != 0 {
            return bad("hidden must be divisible by heads");
        }
        if self.max_seq_len < 3 {
            return bad("max_seq_len must be at least 3");
        }
        if self.vocab_size <= crate::vocab::NUM_SPECIALS as usize {
            return bad("vocab_size must exceed the special tokens");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.num_labels != NUM_LABELS {
            return bad("multi-label head must have one output per schema label");
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return bad("init_std must be a non-negative number");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

pub fn check_vocab_hash(expected: &str, found: &str) -> Result<(), ModelError> {
    if expected != found {
        return Err(ModelError::VocabMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}
