//! WordPiece training by likelihood-scored pair merging.
//!
//! Every word starts as its characters (`w`, `##o`, `##r`, `##d`). Each round
//! merges the adjacent pair with the highest `freq(pair) / (freq(left) *
//! freq(right))`; ties go to the more frequent pair, then to the
//! lexicographically smallest merged token. Scores are compared exactly as
//! integer cross-products so the result never depends on float rounding or
//! hash iteration order.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{pre_tokenize, TrainError, Vocabulary, CONTINUATION_PREFIX, MAX_WORD_CHARS, SPECIAL_TOKENS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabTrainerConfig {
    pub vocab_size: usize,
    pub min_pair_frequency: u64,
    /// Longest merged piece, in characters excluding the `##` prefix.
    pub max_token_length: usize,
    pub cased: bool,
}

impl Default for VocabTrainerConfig {
    fn default() -> Self {
        VocabTrainerConfig {
            vocab_size: 32000,
            min_pair_frequency: 2,
            max_token_length: MAX_WORD_CHARS,
            cased: true,
        }
    }
}

type Pair = (u32, u32);

struct Symbols {
    names: Vec<String>,
    ids: HashMap<String, u32>,
    /// Characters excluding the continuation prefix.
    lengths: Vec<usize>,
}

impl Symbols {
    fn intern(&mut self, name: String) -> u32 {
        if let Some(&id) = self.ids.get(&name) {
            return id;
        }
        let id = self.names.len() as u32;
        let body = name.strip_prefix(CONTINUATION_PREFIX).unwrap_or(&name);
        self.lengths.push(body.chars().count());
        self.ids.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    fn merged_name(&self, (l, r): Pair) -> String {
        let right = &self.names[r as usize];
        let mut s = self.names[l as usize].clone();
        s.push_str(right.strip_prefix(CONTINUATION_PREFIX).unwrap_or(right));
        s
    }
}

struct Word {
    symbols: Vec<u32>,
    count: u64,
}

struct Counts {
    pairs: HashMap<Pair, u64>,
    symbols: Vec<u64>,
    occurrences: HashMap<Pair, HashSet<usize>>,
}

impl Counts {
    fn add_word(&mut self, idx: usize, word: &Word) {
        for &s in &word.symbols {
            if self.symbols.len() <= s as usize {
                self.symbols.resize(s as usize + 1, 0);
            }
            self.symbols[s as usize] += word.count;
        }
        for w in word.symbols.windows(2) {
            let p = (w[0], w[1]);
            *self.pairs.entry(p).or_default() += word.count;
            self.occurrences.entry(p).or_default().insert(idx);
        }
    }

    fn remove_word(&mut self, word: &Word) {
        for &s in &word.symbols {
            self.symbols[s as usize] -= word.count;
        }
        for w in word.symbols.windows(2) {
            let p = (w[0], w[1]);
            let f = self.pairs.get_mut(&p).expect("pair counted");
            *f -= word.count;
            if *f == 0 {
                self.pairs.remove(&p);
            }
        }
    }
}

/// Candidate ordering: higher score, then higher frequency, then smaller token.
fn better(a: (u64, u128, &str), b: (u64, u128, &str)) -> bool {
    // a.freq / a.denom > b.freq / b.denom  <=>  a.freq * b.denom > b.freq * a.denom
    let lhs = a.0 as u128 * b.1;
    let rhs = b.0 as u128 * a.1;
    lhs > rhs || (lhs == rhs && (a.0 > b.0 || (a.0 == b.0 && a.2 < b.2)))
}

pub fn train_wordpiece<S: AsRef<str>>(
    corpus: &[S],
    cfg: &VocabTrainerConfig,
) -> Result<Vocabulary, TrainError> {
    if cfg.min_pair_frequency == 0 {
        return Err(TrainError::BadMinFrequency);
    }
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    for text in corpus {
        for w in pre_tokenize(text.as_ref(), cfg.cased) {
            if w.chars().count() <= MAX_WORD_CHARS {
                *word_counts.entry(w).or_default() += 1;
            }
        }
    }
    if word_counts.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut sorted_words: Vec<(String, u64)> = word_counts.into_iter().collect();
    sorted_words.sort();

    let alphabet: BTreeSet<String> = sorted_words
        .iter()
        .flat_map(|(w, _)| {
            w.chars().enumerate().map(|(i, c)| {
                if i == 0 {
                    c.to_string()
                } else {
                    format!("{CONTINUATION_PREFIX}{c}")
                }
            })
        })
        .collect();
    let minimum = SPECIAL_TOKENS.len() + alphabet.len();
    if cfg.vocab_size <= minimum {
        return Err(TrainError::VocabTooSmall {
            requested: cfg.vocab_size,
            minimum,
        });
    }

    let mut symbols = Symbols {
        names: Vec::new(),
        ids: HashMap::new(),
        lengths: Vec::new(),
    };
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    let mut in_vocab: HashSet<String> = tokens.iter().cloned().collect();
    for a in alphabet {
        symbols.intern(a.clone());
        in_vocab.insert(a.clone());
        tokens.push(a);
    }

    let words: Vec<Word> = sorted_words
        .into_iter()
        .map(|(w, count)| Word {
            symbols: w
                .chars()
                .enumerate()
                .map(|(i, c)| {
                    let name = if i == 0 {
                        c.to_string()
                    } else {
                        format!("{CONTINUATION_PREFIX}{c}")
                    };
                    symbols.ids[&name]
                })
                .collect(),
            count,
        })
        .collect();
    let mut words = words;

    let mut counts = Counts {
        pairs: HashMap::new(),
        symbols: vec![0; symbols.names.len()],
        occurrences: HashMap::new(),
    };
    for (i, w) in words.iter().enumerate() {
        counts.add_word(i, w);
    }

    while tokens.len() < cfg.vocab_size {
        let mut best: Option<(Pair, u64, u128, String)> = None;
        for (&pair, &freq) in &counts.pairs {
            if freq < cfg.min_pair_frequency
                || symbols.lengths[pair.0 as usize] + symbols.lengths[pair.1 as usize]
                    > cfg.max_token_length
            {
                continue;
            }
            let denom =
                counts.symbols[pair.0 as usize] as u128 * counts.symbols[pair.1 as usize] as u128;
            let is_better = match &best {
                None => true,
                Some((_, bf, bd, bname)) => {
                    // Only materialize the merged name when the score ties.
                    let lhs = freq as u128 * bd;
                    let rhs = *bf as u128 * denom;
                    if lhs != rhs || freq != *bf {
                        lhs > rhs || (lhs == rhs && freq > *bf)
                    } else {
                        better((freq, denom, &symbols.merged_name(pair)), (*bf, *bd, bname))
                    }
                }
            };
            if is_better {
                best = Some((pair, freq, denom, symbols.merged_name(pair)));
            }
        }
        let Some((pair, _, _, name)) = best else {
            break;
        };

        let merged = symbols.intern(name.clone());
        if counts.symbols.len() <= merged as usize {
            counts.symbols.resize(merged as usize + 1, 0);
        }
        if in_vocab.insert(name.clone()) {
            tokens.push(name);
        }

        let mut affected: Vec<usize> = counts
            .occurrences
            .remove(&pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();
        for idx in affected {
            let word = &mut words[idx];
            if !word.symbols.windows(2).any(|w| (w[0], w[1]) == pair) {
                continue;
            }
            counts.remove_word(word);
            let mut out = Vec::with_capacity(word.symbols.len());
            let mut i = 0;
            while i < word.symbols.len() {
                if i + 1 < word.symbols.len() && (word.symbols[i], word.symbols[i + 1]) == pair {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(word.symbols[i]);
                    i += 1;
                }
            }
            word.symbols = out;
            counts.add_word(idx, &words[idx]);
        }
    }

    Ok(Vocabulary::from_tokens(tokens, cfg.cased).expect("trainer emits a well-formed vocabulary"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::fertility;

    fn cfg(vocab_size: usize) -> VocabTrainerConfig {
        VocabTrainerConfig {
            vocab_size,
            min_pair_frequency: 1,
            ..Default::default()
        }
    }

    /// Scores every adjacent pair of the initial character segmentation and
    /// returns the winning merged token.
    fn brute_force_first_merge(corpus: &[&str]) -> String {
        let mut seqs: Vec<Vec<String>> = Vec::new();
        for text in corpus {
            for w in text.split_whitespace() {
                seqs.push(
                    w.chars()
                        .enumerate()
                        .map(|(i, c)| if i == 0 { c.to_string() } else { format!("##{c}") })
                        .collect(),
                );
            }
        }
        let sym_freq = |s: &str| -> f64 {
            seqs.iter().flatten().filter(|x| x.as_str() == s).count() as f64
        };
        let mut candidates: Vec<(f64, f64, String)> = Vec::new();
        let mut seen = HashSet::new();
        for seq in &seqs {
            for w in seq.windows(2) {
                if !seen.insert((w[0].clone(), w[1].clone())) {
                    continue;
                }
                let freq = seqs
                    .iter()
                    .map(|s| s.windows(2).filter(|v| v[0] == w[0] && v[1] == w[1]).count())
                    .sum::<usize>() as f64;
                let score = freq / (sym_freq(&w[0]) * sym_freq(&w[1]));
                let name = format!("{}{}", w[0], w[1].trim_start_matches("##"));
                candidates.push((score, freq, name));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then(b.1.partial_cmp(&a.1).unwrap())
                .then(a.2.cmp(&b.2))
        });
        candidates[0].2.clone()
    }

    #[test]
    fn repeated_word_merges_whole() {
        let v = train_wordpiece(&["ab ab ab"], &cfg(50)).unwrap();
        assert!(v.contains("ab"));
        assert_eq!(v.tokenize("ab"), vec!["ab"]);
    }

    #[test]
    fn specials_first() {
        let v = train_wordpiece(&["merhaba dünya"], &cfg(40)).unwrap();
        assert_eq!(&v.tokens()[..5], &SPECIAL_TOKENS.map(String::from));
    }

    #[test]
    fn first_merge_matches_exhaustive_scorer() {
        let corpus = ["abc abc abc abc abd abd abd abd"];
        let expected = brute_force_first_merge(&corpus);
        assert_eq!(expected, "ab");
        // specials (5) + alphabet {a, ##b, ##c, ##d} + one merge
        let v = train_wordpiece(&corpus, &cfg(10)).unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v.tokens()[9], expected);

        let corpus = ["xyz xyz xw qz qz qz", "xw yx"];
        let v = train_wordpiece(&corpus, &cfg(usize::MAX)).unwrap();
        let alphabet = 5 + 7; // x q y + ##y ##z ##w ##x
        assert_eq!(v.tokens()[alphabet], brute_force_first_merge(&corpus));
    }

    #[test]
    fn errors() {
        assert_eq!(
            train_wordpiece::<&str>(&[], &cfg(100)),
            Err(TrainError::EmptyCorpus)
        );
        assert_eq!(
            train_wordpiece(&["  "], &cfg(100)),
            Err(TrainError::EmptyCorpus)
        );
        assert_eq!(
            train_wordpiece(&["abc"], &cfg(8)),
            Err(TrainError::VocabTooSmall {
                requested: 8,
                minimum: 8
            })
        );
        let bad = VocabTrainerConfig {
            min_pair_frequency: 0,
            ..cfg(100)
        };
        assert_eq!(train_wordpiece(&["abc"], &bad), Err(TrainError::BadMinFrequency));
    }

    #[test]
    fn min_frequency_stops_training() {
        let strict = VocabTrainerConfig {
            min_pair_frequency: 3,
            ..cfg(1000)
        };
        let v = train_wordpiece(&["ab ab cd"], &strict).unwrap();
        // nothing occurs three times: specials + {a, ##b, c, ##d}
        assert_eq!(v.len(), 9);
    }

    #[test]
    fn max_token_length_caps_merges() {
        let capped = VocabTrainerConfig {
            max_token_length: 2,
            ..cfg(1000)
        };
        let v = train_wordpiece(&["abcd abcd abcd"], &capped).unwrap();
        assert!(v
            .tokens()
            .iter()
            .all(|t| t.trim_start_matches("##").chars().count() <= 2 || t.starts_with('[')));
    }

    #[test]
    fn deterministic_output() {
        let corpus = ["sol frontal lobda hipodens alan", "sağ frontal lobda ödem", "lobda"];
        let a = train_wordpiece(&corpus, &cfg(60)).unwrap();
        let b = train_wordpiece(&corpus, &cfg(60)).unwrap();
        assert_eq!(a.to_vocab_txt(), b.to_vocab_txt());
    }

    #[test]
    fn larger_vocab_never_raises_training_fertility() {
        let corpus: Vec<String> = crate::synth::general_corpus(7, 40)
            .into_iter()
            .map(|d| d.text)
            .collect();
        let mut last = f64::INFINITY;
        for size in [120, 200, 300, 500, 800, 1500] {
            let v = train_wordpiece(&corpus, &cfg(size)).unwrap();
            let f = fertility(&corpus, &v).fertility;
            assert!(f <= last + 1e-12, "size {size}: {f} > {last}");
            last = f;
        }
    }
}
