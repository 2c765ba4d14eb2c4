use serde::{Deserialize, Serialize};

use super::{Vocabulary, SPECIAL_TOKENS, UNK};

/// Words longer than this (in characters) become a single `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

fn is_punctuation(c: char) -> bool {
    // Combining diacritics stay attached to their base letter.
    !(c.is_alphanumeric() || c.is_whitespace() || ('\u{300}'..='\u{36f}').contains(&c))
}

/// Splits on whitespace, then isolates every punctuation or symbol character
/// as its own word. Uncased vocabularies lowercase with the default Unicode
/// mapping only.
pub fn pre_tokenize(text: &str, cased: bool) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in text.split_whitespace() {
        let chunk = if cased {
            chunk.to_string()
        } else {
            chunk.to_lowercase()
        };
        let mut current = String::new();
        for c in chunk.chars() {
            if c.is_control() {
                continue;
            }
            if is_punctuation(c) {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                words.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

/// Subword tokens per whitespace word over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fertility {
    pub words: u64,
    pub subwords: u64,
    pub unknown: u64,
    /// `subwords / words`
    pub fertility: f64,
    /// `unknown / subwords`
    pub unk_rate: f64,
}

pub fn fertility<S: AsRef<str>>(texts: &[S], vocab: &Vocabulary) -> Fertility {
    let unk = SPECIAL_TOKENS[UNK as usize];
    let (mut words, mut subwords, mut unknown) = (0u64, 0u64, 0u64);
    for text in texts {
        let text = text.as_ref();
        words += text.split_whitespace().count() as u64;
        for t in vocab.tokenize(text) {
            subwords += 1;
            if t == unk {
                unknown += 1;
            }
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Fertility {
        words,
        subwords,
        unknown,
        fertility: ratio(subwords, words),
        unk_rate: ratio(unknown, subwords),
    }
}
