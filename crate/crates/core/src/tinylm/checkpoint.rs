//! Checkpoint files.
//!
//! ```text
//! 8 bytes   magic "RMXTLM\0\0"
//! u32 LE    header length
//! header    JSON: format version, model config, vocabulary hash, seed, step
//! f64 LE    parameters, then Adam first and second moments, each in
//!           `ParameterSet::tensors` order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, ModelError, ParameterSet, TinyLMConfig, TrainState};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RMXTLM\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: TinyLMConfig,
    vocab_hash: String,
    seed: u64,
    step: u64,
}

fn push_values(out: &mut Vec<u8>, p: &ParameterSet) {
    for (_, t) in p.tensors() {
        for x in t {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

fn read_values(p: &mut ParameterSet, bytes: &[u8]) {
    let mut chunks = bytes.chunks_exact(8);
    for t in p.tensors_mut() {
        for x in t.iter_mut() {
            *x = f64::from_le_bytes(chunks.next().unwrap().try_into().unwrap());
        }
    }
}

pub fn encode_checkpoint(state: &TrainState) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        config: state.params.config.clone(),
        vocab_hash: state.vocab_hash.clone(),
        seed: state.seed,
        step: state.adam.step,
    };
    let json = serde_json::to_vec(&header).expect("serializable header");
    let mut out = Vec::with_capacity(12 + json.len() + 24 * state.params.num_parameters());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    push_values(&mut out, &state.params);
    push_values(&mut out, &state.adam.m);
    push_values(&mut out, &state.adam.v);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainState, ModelError> {
    let bad = |m: &str| ModelError::Checkpoint(m.to_string());
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body_start = 12usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("header runs past end of file"))?;
    let header: Header =
        serde_json::from_slice(&bytes[12..body_start]).map_err(|e| bad(&format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported format version {}", header.format_version)));
    }
    header.config.validate()?;
    let mut params = ParameterSet::zeros(&header.config);
    let n = params.num_parameters() * 8;
    let body = &bytes[body_start..];
    if body.len() != 3 * n {
        return Err(bad(&format!("expected {} value bytes, found {}", 3 * n, body.len())));
    }
    let mut adam = Adam::new(&header.config);
    read_values(&mut params, &body[..n]);
    read_values(&mut adam.m, &body[n..2 * n]);
    read_values(&mut adam.v, &body[2 * n..]);
    adam.step = header.step;
    Ok(TrainState {
        params,
        adam,
        seed: header.seed,
        vocab_hash: header.vocab_hash,
    })
}

pub fn save_checkpoint(state: &TrainState, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode_checkpoint(state))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState, ModelError> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinylm::gradcheck::tests::sample_batch;
    use crate::tinylm::{pretrain, OptimizerConfig};

    fn cfg() -> TinyLMConfig {
        TinyLMConfig {
            layers: 1,
            hidden: 8,
            heads: 2,
            ffn: 16,
            max_seq_len: 12,
            vocab_size: 30,
            dropout: 0.1,
            num_labels: 13,
            init_std: 0.02,
        }
    }

    #[test]
    fn resume_continues_bit_identically() {
        let data = sample_batch(10, 30, 12, 3);
        let opt = OptimizerConfig {
            learning_rate: 1e-3,
            warmup_steps: 3,
            batch_size: 4,
            ..OptimizerConfig::pretrain()
        };
        let mut straight = TrainState::new(&cfg(), 5, "vh").unwrap();
        let full = pretrain(&mut straight, &data, &opt, 8).unwrap();

        let mut first = TrainState::new(&cfg(), 5, "vh").unwrap();
        pretrain(&mut first, &data, &opt, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        save_checkpoint(&first, &path).unwrap();
        let mut resumed = load_checkpoint(&path).unwrap();
        assert_eq!(resumed, first);
        let rest = pretrain(&mut resumed, &data, &opt, 3).unwrap();
        assert_eq!(&full[5..], &rest[..]);
        assert_eq!(resumed, straight);
    }

    #[test]
    fn rejects_damaged_files() {
        let state = TrainState::new(&cfg(), 1, "vh").unwrap();
        let bytes = encode_checkpoint(&state);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_checkpoint(&wrong).is_err());
        assert!(decode_checkpoint(b"short").is_err());
    }
}
