//! Browser demo of three pipeline stages on synthetic clinical text.
//!
//! [`Demo`] trains two small WordPiece vocabularies when it is created, one
//! on general text only and one on general plus domain text. The page then
//! compares their tokenizations, shows masked-LM corruption of a report and
//! plans a balanced corpus mix. Every method returns a JSON string.

use radmix::corpus::{CleanDocument, CleanOutcome, Cleaner, CleaningConfig, RawDocument};
use radmix::instances::{apply_masking, MaskingConfig, SentencePair, IS_NEXT};
use radmix::mixing::{build_mix_plan_with, interleave, split_sentences, Chunk, StreamEntry, DEFAULT_TOLERANCE};
use radmix::seed;
use radmix::synth::{self, SynonymSubset};
use radmix::vocab::{fertility, train_wordpiece, VocabTrainerConfig, Vocabulary, MASK};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Longest masked sequence the demo builds.
const MASK_MAX_LEN: usize = 128;
/// Stream entries shown for a mix plan.
const STREAM_PREVIEW: usize = 60;

fn cleaned(docs: Vec<RawDocument>) -> Vec<CleanDocument> {
    let cleaner = Cleaner::new(&CleaningConfig::default()).expect("default cleaning patterns compile");
    docs.iter()
        .filter_map(|d| match cleaner.clean(d) {
            CleanOutcome::Kept(c) => Some(c),
            CleanOutcome::Filtered { .. } => None,
        })
        .collect()
}

#[wasm_bindgen]
pub struct Demo {
    general: Vocabulary,
    mixed: Vocabulary,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, vocab_size: usize) -> Result<Demo, String> {
        let seed = u64::from(seed);
        let general = cleaned(synth::general_corpus(seed, 300));
        let domain = cleaned(synth::domain_corpus(seed, 300));
        let cfg = VocabTrainerConfig {
            vocab_size,
            ..Default::default()
        };
        let general_texts: Vec<&str> = general.iter().map(|d| d.text.as_str()).collect();
        let mixed_texts: Vec<&str> = general.iter().chain(&domain).map(|d| d.text.as_str()).collect();
        Ok(Demo {
            general: train_wordpiece(&general_texts, &cfg).map_err(|e| e.to_string())?,
            mixed: train_wordpiece(&mixed_texts, &cfg).map_err(|e| e.to_string())?,
        })
    }

    /// A synthetic head-CT report to start from.
    pub fn sample_report(&self, seed: u32) -> String {
        let reports = synth::task_reports(u64::from(seed), 1, 0.3, SynonymSubset::All);
        reports[0].text.clone()
    }

    /// Tokens of `text` under both vocabularies, with fertility and unknown rate.
    pub fn tokenize(&self, text: &str) -> String {
        let side = |v: &Vocabulary| {
            json!({
                "tokens": v.tokenize(text),
                "fertility": fertility(&[text], v),
                "vocab_size": v.len(),
            })
        };
        json!({"general": side(&self.general), "mixed": side(&self.mixed)}).to_string()
    }

    /// Packs the sentences of `text` into an `A`/`B` pair and masks it with
    /// the default 15% / 80-10-10 settings.
    pub fn mask(&self, text: &str, seed: u32) -> Result<String, String> {
        let sentences: Vec<Vec<u32>> = split_sentences(text)
            .iter()
            .map(|s| self.mixed.tokenize_to_ids(s))
            .filter(|s| !s.is_empty())
            .collect();
        let (mut a, mut b): (Vec<u32>, Vec<u32>) = if sentences.len() >= 2 {
            let half = sentences.len() / 2;
            (sentences[..half].concat(), sentences[half..].concat())
        } else {
            let all = sentences.concat();
            let half = all.len() / 2;
            (all[..half].to_vec(), all[half..].to_vec())
        };
        if a.is_empty() || b.is_empty() {
            return Err("need at least two tokens of text".into());
        }
        while a.len() + b.len() > MASK_MAX_LEN - 3 {
            if a.len() >= b.len() {
                a.pop();
            } else {
                b.pop();
            }
        }
        let pair = SentencePair {
            a,
            b,
            next_sentence_label: IS_NEXT,
        };
        let len = pair.a.len() + pair.b.len() + 3;
        let mut rng = seed::rng(u64::from(seed), &[]);
        let inst = apply_masking(&pair, &self.mixed, &MaskingConfig::default(), len, &mut rng);
        let originals: std::collections::HashMap<u32, u32> = (0..inst.num_predictions())
            .map(|k| (inst.masked_positions[k], inst.masked_label_ids[k]))
            .collect();
        let token = |id: u32| self.mixed.token(id).unwrap_or("[?]").to_string();
        let tokens: Vec<Value> = (0..len)
            .map(|i| {
                let shown = inst.input_ids[i];
                let original = originals.get(&(i as u32)).copied();
                let kind = match original {
                    None => "none",
                    Some(_) if shown == MASK => "mask",
                    Some(o) if o == shown => "keep",
                    Some(_) => "random",
                };
                json!({
                    "token": token(shown),
                    "original": original.map(token),
                    "segment": inst.segment_ids[i],
                    "kind": kind,
                })
            })
            .collect();
        Ok(json!({"tokens": tokens, "predictions": inst.num_predictions()}).to_string())
    }
}

/// Mix plan for `large` general and `small` domain chunks, with the head of
/// the shuffled stream (`L12` is general chunk 12, `S3` domain chunk 3).
#[wasm_bindgen]
pub fn mix_plan(large: usize, small: usize, ratio: f64, seed: u32) -> Result<String, String> {
    let plan = build_mix_plan_with(large, small, u64::from(seed), ratio, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    let placeholder = |n: usize| -> Vec<Chunk> {
        (0..n)
            .map(|i| Chunk {
                sentences: Vec::new(),
                source: radmix::corpus::Source::General,
                origin_doc: i.to_string(),
                chunk_index: 0,
            })
            .collect()
    };
    let stream = interleave(&plan, &placeholder(large), &placeholder(small)).map_err(|e| e.to_string())?;
    let head: Vec<String> = stream
        .iter()
        .take(STREAM_PREVIEW)
        .map(|e| match e {
            StreamEntry::Large(i) => format!("L{i}"),
            StreamEntry::Small(i) => format!("S{i}"),
        })
        .collect();
    Ok(json!({
        "plan": plan,
        "within_tolerance": plan.within_tolerance(),
        "stream_head": head,
    })
    .to_string())
}
