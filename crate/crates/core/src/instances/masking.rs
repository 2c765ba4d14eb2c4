use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{InstanceError, PretrainInstance, SentencePair};
use crate::seed::StageRng;
use crate::vocab::{Vocabulary, CLS, MASK, NUM_SPECIALS, SEP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskingConfig {
    pub mask_probability: f64,
    pub max_predictions_per_seq: usize,
    /// Of the selected positions: share replaced by `[MASK]`.
    pub mask_token_share: f64,
    /// Share replaced by a random non-special token.
    pub random_token_share: f64,
    /// Share left unchanged.
    pub keep_share: f64,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig {
            mask_probability: 0.15,
            max_predictions_per_seq: 76,
            mask_token_share: 0.8,
            random_token_share: 0.1,
            keep_share: 0.1,
        }
    }
}

impl MaskingConfig {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if !(0.0..=1.0).contains(&self.mask_probability) {
            return Err(InstanceError::Config("mask_probability must lie in [0, 1]".into()));
        }
        let shares = [self.mask_token_share, self.random_token_share, self.keep_share];
        if shares.iter().any(|s| !(0.0..=1.0).contains(s))
            || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(InstanceError::Config(
                "replacement shares must be non-negative and sum to 1".into(),
            ));
        }
        if self.mask_probability > 0.0 && self.max_predictions_per_seq == 0 {
            return Err(InstanceError::Config(
                "max_predictions_per_seq must be positive when masking".into(),
            ));
        }
        Ok(())
    }
}

/// Number of positions selected for prediction out of `maskable` candidates.
/// A zero probability disables masking entirely.
pub fn masked_count(maskable: usize, cfg: &MaskingConfig) -> usize {
    if cfg.mask_probability <= 0.0 || maskable == 0 {
        return 0;
    }
    let want = (cfg.mask_probability * maskable as f64).round() as usize;
    want.max(1).min(cfg.max_predictions_per_seq).min(maskable)
}

/// Packs `[CLS] A [SEP] B [SEP]`, pads to `max_seq_len` and selects prediction
/// targets. Prediction features are padded to `max_predictions_per_seq` with
/// zero weights.
pub fn apply_masking(
    pair: &SentencePair,
    vocab: &Vocabulary,
    cfg: &MaskingConfig,
    max_seq_len: usize,
    rng: &mut StageRng,
) -> PretrainInstance {
    let mut input_ids = Vec::with_capacity(max_seq_len);
    let mut segment_ids = Vec::with_capacity(max_seq_len);
    input_ids.push(CLS);
    segment_ids.push(0);
    input_ids.extend_from_slice(&pair.a);
    segment_ids.extend(std::iter::repeat(0).take(pair.a.len()));
    input_ids.push(SEP);
    segment_ids.push(0);
    input_ids.extend_from_slice(&pair.b);
    segment_ids.extend(std::iter::repeat(1).take(pair.b.len()));
    input_ids.push(SEP);
    segment_ids.push(1);
    let len = input_ids.len();
    assert!(len <= max_seq_len, "pair does not fit in max_seq_len");

    let candidates: Vec<usize> = (0..len)
        .filter(|&i| input_ids[i] != CLS && input_ids[i] != SEP)
        .collect();
    let count = masked_count(candidates.len(), cfg);
    let mut chosen: Vec<usize> = sample(rng, candidates.len(), count)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    chosen.sort_unstable();

    let vocab_size = vocab.len() as u32;
    let mut masked_positions = Vec::with_capacity(cfg.max_predictions_per_seq);
    let mut masked_label_ids = Vec::with_capacity(cfg.max_predictions_per_seq);
    for &pos in &chosen {
        let original = input_ids[pos];
        let r: f64 = rng.gen();
        if r < cfg.mask_token_share {
            input_ids[pos] = MASK;
        } else if r < cfg.mask_token_share + cfg.random_token_share && vocab_size > NUM_SPECIALS {
            input_ids[pos] = rng.gen_range(NUM_SPECIALS..vocab_size);
        }
        masked_positions.push(pos as u32);
        masked_label_ids.push(original);
    }
    let mut masked_weights = vec![1u8; masked_positions.len()];
    let pad_to = cfg.max_predictions_per_seq.max(masked_positions.len());
    masked_positions.resize(pad_to, 0);
    masked_label_ids.resize(pad_to, 0);
    masked_weights.resize(pad_to, 0);

    let mut attention_mask = vec![1u8; len];
    attention_mask.resize(max_seq_len, 0);
    input_ids.resize(max_seq_len, 0);
    segment_ids.resize(max_seq_len, 0);

    PretrainInstance {
        input_ids,
        attention_mask,
        segment_ids,
        masked_positions,
        masked_label_ids,
        masked_weights,
        next_sentence_label: pair.next_sentence_label,
    }
}
