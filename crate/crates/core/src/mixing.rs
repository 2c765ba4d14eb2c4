//! Balanced mixing of a small domain corpus with a large general corpus.
//!
//! Both corpora are cut into chunks with the same token budget. The small
//! side is then repeated `repeat_factor` times so its chunk exposures match
//! the large side, and the union is shuffled with a seeded permutation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CleanDocument, Source};
use crate::seed::{self, stage};
use crate::vocab::Vocabulary;

/// One chunk-sized pretraining sequence, matching the maximum sequence length.
pub const DEFAULT_CHUNK_TOKENS: usize = 512;
pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum MixError {
    #[error("chunk_target_tokens must be at least 1")]
    BadChunkTarget,
    #[error("simultaneous pretraining requires a domain corpus")]
    EmptyDomain,
    #[error("simultaneous pretraining requires a general corpus")]
    EmptyGeneral,
    #[error("target ratio must be positive and finite, got {0}")]
    BadRatio(f64),
    #[error("plan expects {expected} {side} chunks, got {found}")]
    PlanMismatch {
        side: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub id: String,
    pub source: Source,
    pub sentences: Vec<Vec<u32>>,
}

/// Splits flattened text into sentences after words ending in `.`, `!`, `?`
/// or `…`.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for word in text.split_whitespace() {
        current.push(word);
        if word.ends_with(['.', '!', '?', '…']) {
            out.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        out.push(current.join(" "));
    }
    out
}

pub fn tokenize_document(doc: &CleanDocument, vocab: &Vocabulary) -> TokenizedDocument {
    TokenizedDocument {
        id: doc.id.clone(),
        source: doc.source,
        sentences: split_sentences(&doc.text)
            .iter()
            .map(|s| vocab.tokenize_to_ids(s))
            .filter(|s| !s.is_empty())
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub sentences: Vec<Vec<u32>>,
    pub source: Source,
    pub origin_doc: String,
    /// Position of this chunk within its document.
    pub chunk_index: usize,
}

impl Chunk {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

fn chunk_document(doc: &TokenizedDocument, target: usize) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut current: Vec<Vec<u32>> = Vec::new();
    let mut size = 0;
    let flush = |current: &mut Vec<Vec<u32>>, size: &mut usize, chunks: &mut Vec<Chunk>| {
        if !current.is_empty() {
            chunks.push(Chunk {
                sentences: std::mem::take(current),
                source: doc.source,
                origin_doc: doc.id.clone(),
                chunk_index: chunks.len(),
            });
            *size = 0;
        }
    };
    for sentence in doc.sentences.iter().filter(|s| !s.is_empty()) {
        if size + sentence.len() > target {
            flush(&mut current, &mut size, &mut chunks);
        }
        size += sentence.len();
        current.push(sentence.clone());
        if size >= target {
            flush(&mut current, &mut size, &mut chunks);
        }
    }
    flush(&mut current, &mut size, &mut chunks);
    chunks
}

/// Greedily packs whole sentences into chunks of at most `chunk_target_tokens`.
/// Chunks never cross document boundaries; an over-long sentence becomes a
/// chunk of its own.
pub fn split_into_chunks(
    docs: &[TokenizedDocument],
    chunk_target_tokens: usize,
) -> Result<Vec<Chunk>, MixError> {
    if chunk_target_tokens < 1 {
        return Err(MixError::BadChunkTarget);
    }
    Ok(crate::par::map_ordered(docs, |_, d| chunk_document(d, chunk_target_tokens))
        .into_iter()
        .flatten()
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub large_chunk_count: usize,
    pub small_chunk_count: usize,
    pub repeat_factor: usize,
    pub seed: u64,
    /// Desired small:large exposure ratio.
    pub target_ratio: f64,
    pub tolerance: f64,
    pub small_exposures: usize,
    pub large_exposures: usize,
    /// `|small_exposures - target_ratio * large_exposures| / (target_ratio * large_exposures)`
    pub imbalance: f64,
}

impl MixPlan {
    pub fn within_tolerance(&self) -> bool {
        self.imbalance <= self.tolerance
    }

    pub fn stream_len(&self) -> usize {
        self.small_exposures + self.large_exposures
    }
}

/// 1:1 plan with the default tolerance.
pub fn build_mix_plan(
    large_chunk_count: usize,
    small_chunk_count: usize,
    seed: u64,
) -> Result<MixPlan, MixError> {
    build_mix_plan_with(
        large_chunk_count,
        small_chunk_count,
        seed,
        1.0,
        DEFAULT_TOLERANCE,
    )
}

/// `repeat_factor = max(1, round(target_ratio * large / small))`. Residual
/// imbalance is recorded in the plan, not corrected.
pub fn build_mix_plan_with(
    large_chunk_count: usize,
    small_chunk_count: usize,
    seed: u64,
    target_ratio: f64,
    tolerance: f64,
) -> Result<MixPlan, MixError> {
    if small_chunk_count == 0 {
        return Err(MixError::EmptyDomain);
    }
    if large_chunk_count == 0 {
        return Err(MixError::EmptyGeneral);
    }
    if !(target_ratio.is_finite() && target_ratio > 0.0) {
        return Err(MixError::BadRatio(target_ratio));
    }
    let wanted = target_ratio * large_chunk_count as f64;
    let repeat_factor = ((wanted / small_chunk_count as f64).round() as usize).max(1);
    let small_exposures = repeat_factor * small_chunk_count;
    Ok(MixPlan {
        large_chunk_count,
        small_chunk_count,
        repeat_factor,
        seed,
        target_ratio,
        tolerance,
        small_exposures,
        large_exposures: large_chunk_count,
        imbalance: (small_exposures as f64 - wanted).abs() / wanted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "corpus", content = "index", rename_all = "lowercase")]
pub enum StreamEntry {
    Large(usize),
    Small(usize),
}

impl StreamEntry {
    pub fn resolve<'a>(self, large: &'a [Chunk], small: &'a [Chunk]) -> &'a Chunk {
        match self {
            StreamEntry::Large(i) => &large[i],
            StreamEntry::Small(i) => &small[i],
        }
    }
}

/// Seeded uniform shuffle of every large chunk plus `repeat_factor` copies of
/// every small chunk.
pub fn interleave(
    plan: &MixPlan,
    large: &[Chunk],
    small: &[Chunk],
) -> Result<Vec<StreamEntry>, MixError> {
    use rand::seq::SliceRandom;

    if large.len() != plan.large_chunk_count {
        return Err(MixError::PlanMismatch {
            side: "large",
            expected: plan.large_chunk_count,
            found: large.len(),
        });
    }
    if small.len() != plan.small_chunk_count {
        return Err(MixError::PlanMismatch {
            side: "small",
            expected: plan.small_chunk_count,
            found: small.len(),
        });
    }
    let mut stream: Vec<StreamEntry> = Vec::with_capacity(plan.stream_len());
    stream.extend((0..large.len()).map(StreamEntry::Large));
    for _ in 0..plan.repeat_factor {
        stream.extend((0..small.len()).map(StreamEntry::Small));
    }
    stream.shuffle(&mut seed::rng(plan.seed, &[stage::MIX]));
    Ok(stream)
}

/// Task-adaptive streams skip mixing entirely: the domain chunks in corpus order.
pub fn unmixed(small: &[Chunk]) -> Vec<StreamEntry> {
    (0..small.len()).map(StreamEntry::Small).collect()
}
