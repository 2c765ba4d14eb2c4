//! Masked-LM + next-sentence pretraining instances.
//!
//! A chunk stream is first turned into sentence pairs `(A, B, is_random)`.
//! Each pair is then masked `dupe_factor` times with independent seeds, so
//! the same text appears with different prediction targets.

mod masking;
mod pairs;
pub mod record;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use masking::{apply_masking, masked_count, MaskingConfig};
pub use pairs::{build_sentence_pairs, PairConfig, SentencePair};
pub use record::{read_records, write_records, RecordError, RecordReader, RecordWriter};

use crate::mixing::Chunk;
use crate::seed::{self, stage};
use crate::vocab::{Vocabulary, CLS, MASK, PAD, SEP};

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("invalid instance configuration: {0}")]
    Config(String),
}

/// Label values for [`PretrainInstance::next_sentence_label`].
pub const IS_NEXT: u8 = 0;
pub const IS_RANDOM: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainInstance {
    pub input_ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub segment_ids: Vec<u8>,
    pub masked_positions: Vec<u32>,
    pub masked_label_ids: Vec<u32>,
    pub masked_weights: Vec<u8>,
    pub next_sentence_label: u8,
}

impl PretrainInstance {
    /// Number of real (non-padding) tokens.
    pub fn len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_predictions(&self) -> usize {
        self.masked_weights.iter().filter(|&&w| w == 1).count()
    }

    /// Structural checks shared by the generator tests and the record reader.
    pub fn check(&self) -> Result<(), String> {
        let n = self.input_ids.len();
        if self.attention_mask.len() != n || self.segment_ids.len() != n {
            return Err("sequence features differ in length".into());
        }
        let m = self.masked_positions.len();
        if self.masked_label_ids.len() != m || self.masked_weights.len() != m {
            return Err("prediction features differ in length".into());
        }
        let len = self.len();
        if self.attention_mask[..len].iter().any(|&x| x != 1)
            || self.attention_mask[len..].iter().any(|&x| x != 0)
        {
            return Err("attention mask is not a prefix".into());
        }
        if len < 3 || self.input_ids[0] != CLS {
            return Err("sequence must start with [CLS]".into());
        }
        let seps = self.input_ids[..len].iter().filter(|&&t| t == SEP).count();
        if seps != 2 || self.input_ids[len - 1] != SEP {
            return Err("sequence must contain exactly two [SEP]".into());
        }
        let segments = &self.segment_ids[..len];
        let transitions = segments.windows(2).filter(|w| w[0] == 0 && w[1] == 1).count();
        if segments.windows(2).any(|w| w[1] < w[0]) || segments[0] != 0 || transitions != 1 {
            return Err("segment ids must step from 0 to 1 exactly once".into());
        }
        for (i, &w) in self.masked_weights.iter().enumerate() {
            if w > 1 {
                return Err("masked weight must be 0 or 1".into());
            }
            if w == 1 {
                let p = self.masked_positions[i] as usize;
                if p == 0 || p >= len || self.input_ids[p] == SEP {
                    return Err(format!("masked position {p} is not maskable"));
                }
                if matches!(self.masked_label_ids[i], PAD | CLS | SEP | MASK) {
                    return Err(format!("masked position {p} targets a special token"));
                }
            }
        }
        if self.next_sentence_label > 1 {
            return Err("next sentence label must be 0 or 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceConfig {
    pub max_seq_len: usize,
    pub nsp_random_prob: f64,
    pub short_seq_prob: f64,
    pub dupe_factor: usize,
    pub masking: MaskingConfig,
    pub seed: u64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            max_seq_len: 512,
            nsp_random_prob: 0.5,
            short_seq_prob: 0.1,
            dupe_factor: 5,
            masking: MaskingConfig::default(),
            seed: 12345,
        }
    }
}

impl InstanceConfig {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.max_seq_len < 5 {
            return Err(InstanceError::Config("max_seq_len must be at least 5".into()));
        }
        for (name, p) in [
            ("nsp_random_prob", self.nsp_random_prob),
            ("short_seq_prob", self.short_seq_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(InstanceError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.dupe_factor < 1 {
            return Err(InstanceError::Config("dupe_factor must be at least 1".into()));
        }
        self.masking.validate()
    }

    fn pair_config(&self) -> PairConfig {
        PairConfig {
            max_seq_len: self.max_seq_len,
            nsp_random_prob: self.nsp_random_prob,
            short_seq_prob: self.short_seq_prob,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub chunks: usize,
    pub pairs: usize,
    pub skipped_chunks: usize,
    pub instances: usize,
}

/// Builds sentence pairs once, then masks each pair `dupe_factor` times. Output
/// is round-major: all pairs of round 0, then round 1, and so on.
pub fn create_instances(
    stream: &[&Chunk],
    vocab: &Vocabulary,
    cfg: &InstanceConfig,
) -> Result<(Vec<PretrainInstance>, InstanceStats), InstanceError> {
    cfg.validate()?;
    let (pairs, skipped) = build_sentence_pairs(stream, &cfg.pair_config());
    let mut instances = Vec::with_capacity(pairs.len() * cfg.dupe_factor);
    for round in 0..cfg.dupe_factor as u64 {
        instances.extend(crate::par::map_ordered(&pairs, |i, pair| {
            let mut rng = seed::rng(cfg.seed, &[stage::MASKING, round, i as u64]);
            apply_masking(pair, vocab, &cfg.masking, cfg.max_seq_len, &mut rng)
        }));
    }
    let stats = InstanceStats {
        chunks: stream.len(),
        pairs: pairs.len(),
        skipped_chunks: skipped,
        instances: instances.len(),
    };
    Ok((instances, stats))
}

/// Metadata written next to a record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSidecar {
    pub command: String,
    pub mode: String,
    pub config_hash: String,
    pub seed: u64,
    pub vocab_hash: String,
    pub config: InstanceConfig,
    pub stats: InstanceStats,
}

/// Human-readable JSON form of an instance, for debugging.
pub fn debug_json(instance: &PretrainInstance, vocab: &Vocabulary) -> serde_json::Value {
    let len = instance.len();
    let token = |id: u32| vocab.token(id).unwrap_or("[?]").to_string();
    let masked: Vec<serde_json::Value> = instance
        .masked_positions
        .iter()
        .zip(&instance.masked_label_ids)
        .zip(&instance.masked_weights)
        .filter(|(_, &w)| w == 1)
        .map(|((&p, &l), _)| serde_json::json!({"position": p, "label": token(l)}))
        .collect();
    serde_json::json!({
        "tokens": instance.input_ids[..len].iter().map(|&t| token(t)).collect::<Vec<_>>(),
        "segment_ids": &instance.segment_ids[..len],
        "masked": masked,
        "is_random_next": instance.next_sentence_label == IS_RANDOM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::vocab::SPECIAL_TOKENS;

    pub(crate) fn test_vocab(n: usize) -> Vocabulary {
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain((0..n).map(|i| format!("w{i}")))
            .collect();
        Vocabulary::from_tokens(tokens, true).unwrap()
    }

    pub(crate) fn chunks(n: usize, sentences: usize, len: usize, vocab_size: u32) -> Vec<Chunk> {
        (0..n)
            .map(|c| Chunk {
                sentences: (0..sentences)
                    .map(|s| {
                        (0..len)
                            .map(|t| 5 + ((c * 31 + s * 7 + t) as u32 % (vocab_size - 5)))
                            .collect()
                    })
                    .collect(),
                source: Source::General,
                origin_doc: format!("doc{c}"),
                chunk_index: 0,
            })
            .collect()
    }

    #[test]
    fn dupe_factor_one_yields_one_instance_per_pair() {
        let v = test_vocab(100);
        let cs = chunks(20, 6, 12, 105);
        let refs: Vec<&Chunk> = cs.iter().collect();
        let cfg = InstanceConfig {
            max_seq_len: 64,
            dupe_factor: 1,
            ..Default::default()
        };
        let (inst, stats) = create_instances(&refs, &v, &cfg).unwrap();
        assert_eq!(inst.len(), stats.pairs);
        for i in &inst {
            i.check().unwrap();
        }
        let (empty, _) = create_instances(&[], &v, &cfg).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn dupes_share_text_but_not_masks() {
        let v = test_vocab(500);
        let cs = chunks(12, 40, 16, 505);
        let refs: Vec<&Chunk> = cs.iter().collect();
        let cfg = InstanceConfig {
            dupe_factor: 3,
            short_seq_prob: 0.0,
            ..Default::default()
        };
        let (inst, stats) = create_instances(&refs, &v, &cfg).unwrap();
        let p = stats.pairs;
        assert_eq!(inst.len(), 3 * p);
        for i in 0..p {
            let copies = [&inst[i], &inst[p + i], &inst[2 * p + i]];
            let unmasked = |x: &PretrainInstance| {
                let mut ids = x.input_ids.clone();
                for (k, &pos) in x.masked_positions.iter().enumerate() {
                    if x.masked_weights[k] == 1 {
                        ids[pos as usize] = x.masked_label_ids[k];
                    }
                }
                ids
            };
            assert_eq!(unmasked(copies[0]), unmasked(copies[1]));
            assert_eq!(unmasked(copies[1]), unmasked(copies[2]));
            if copies[0].len() > 400 {
                assert_ne!(copies[0].masked_positions, copies[1].masked_positions);
                assert_ne!(copies[1].masked_positions, copies[2].masked_positions);
                assert_ne!(copies[0].masked_positions, copies[2].masked_positions);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let v = test_vocab(10);
        let cfg = InstanceConfig {
            dupe_factor: 0,
            ..Default::default()
        };
        assert!(create_instances(&[], &v, &cfg).is_err());
    }

    #[test]
    fn debug_json_lists_masked_tokens() {
        let v = test_vocab(100);
        let cs = chunks(4, 4, 8, 105);
        let refs: Vec<&Chunk> = cs.iter().collect();
        let cfg = InstanceConfig {
            max_seq_len: 32,
            dupe_factor: 1,
            ..Default::default()
        };
        let (inst, _) = create_instances(&refs, &v, &cfg).unwrap();
        let j = debug_json(&inst[0], &v);
        assert_eq!(j["tokens"][0], "[CLS]");
        assert_eq!(
            j["masked"].as_array().unwrap().len(),
            inst[0].num_predictions()
        );
    }
}
