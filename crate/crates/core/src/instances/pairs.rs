use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{IS_NEXT, IS_RANDOM};
use crate::mixing::Chunk;
use crate::seed::{self, stage, StageRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConfig {
    pub max_seq_len: usize,
    pub nsp_random_prob: f64,
    pub short_seq_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub next_sentence_label: u8,
}

fn same_chunk(x: &Chunk, y: &Chunk) -> bool {
    x.source == y.source && x.chunk_index == y.chunk_index && x.origin_doc == y.origin_doc
}

/// Trims the longer side from its end until both fit in `max_tokens`.
fn truncate_pair(a: &mut Vec<u32>, b: &mut Vec<u32>, max_tokens: usize) {
    while a.len() + b.len() > max_tokens {
        if a.len() >= b.len() {
            a.pop();
        } else {
            b.pop();
        }
    }
}

fn random_partner<'a>(stream: &[&'a Chunk], pos: usize, rng: &mut StageRng) -> Option<&'a Chunk> {
    if stream.len() < 2 {
        return None;
    }
    let mut pick = None;
    for _ in 0..10 {
        let mut j = rng.gen_range(0..stream.len() - 1);
        if j >= pos {
            j += 1;
        }
        pick = Some(stream[j]);
        if !same_chunk(stream[j], stream[pos]) {
            break;
        }
    }
    pick
}

/// Pairs for one stream position; returns `true` in the second slot when a
/// sentence group had to be skipped for lack of a partner.
fn pairs_for_chunk(
    stream: &[&Chunk],
    pos: usize,
    cfg: &PairConfig,
    rng: &mut StageRng,
) -> (Vec<SentencePair>, bool) {
    let chunk = stream[pos];
    let sentences: Vec<&Vec<u32>> = chunk.sentences.iter().filter(|s| !s.is_empty()).collect();
    let max_tokens = cfg.max_seq_len - 3;
    let target = if rng.gen::<f64>() < cfg.short_seq_prob {
        rng.gen_range(2..=max_tokens)
    } else {
        max_tokens
    };

    let mut out = Vec::new();
    let mut skipped = false;
    let mut group: Vec<&Vec<u32>> = Vec::new();
    let mut group_len = 0;
    let mut i = 0;
    while i < sentences.len() {
        group.push(sentences[i]);
        group_len += sentences[i].len();
        // A group closes once it is long enough and can be split into A and
        // B, or when the chunk runs out.
        if i == sentences.len() - 1 || (group_len >= target && group.len() >= 2) {
            let a_end = if group.len() >= 2 {
                rng.gen_range(1..group.len())
            } else {
                1
            };
            let mut a: Vec<u32> = group[..a_end].iter().flat_map(|s| s.iter().copied()).collect();
            let want_random = rng.gen::<f64>() < cfg.nsp_random_prob;
            let partner = if want_random && cfg.nsp_random_prob > 0.0 {
                random_partner(stream, pos, rng)
            } else {
                None
            };
            let b_and_label = match partner {
                Some(other) => {
                    let target_b = target.saturating_sub(a.len()).max(1);
                    let other: Vec<&Vec<u32>> =
                        other.sentences.iter().filter(|s| !s.is_empty()).collect();
                    let start = rng.gen_range(0..other.len());
                    let mut b = Vec::new();
                    for s in &other[start..] {
                        b.extend_from_slice(s);
                        if b.len() >= target_b {
                            break;
                        }
                    }
                    // Sentences not used for A go back into the pool.
                    i -= group.len() - a_end;
                    Some((b, IS_RANDOM))
                }
                None if group.len() >= 2 => Some((
                    group[a_end..].iter().flat_map(|s| s.iter().copied()).collect(),
                    IS_NEXT,
                )),
                None => None,
            };
            match b_and_label {
                Some((mut b, label)) => {
                    truncate_pair(&mut a, &mut b, max_tokens);
                    out.push(SentencePair {
                        a,
                        b,
                        next_sentence_label: label,
                    });
                }
                None => skipped = true,
            }
            group.clear();
            group_len = 0;
        }
        i += 1;
    }
    (out, skipped)
}

/// Builds `(A, B)` pairs from every chunk of the stream. Returns the pairs in
/// stream order and the number of chunks that had a sentence group skipped
/// because no true continuation or random partner was available.
pub fn build_sentence_pairs(stream: &[&Chunk], cfg: &PairConfig) -> (Vec<SentencePair>, usize) {
    assert!(cfg.max_seq_len >= 5, "max_seq_len must leave room for A, B and 3 specials");
    let per_chunk = crate::par::map_ordered(stream, |pos, _| {
        let mut rng = seed::rng(cfg.seed, &[stage::PAIRS, pos as u64]);
        pairs_for_chunk(stream, pos, cfg, &mut rng)
    });
    let skipped = per_chunk.iter().filter(|(_, s)| *s).count();
    (per_chunk.into_iter().flat_map(|(p, _)| p).collect(), skipped)
}
