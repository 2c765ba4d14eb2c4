//! WordPiece vocabularies.
//!
//! A [`Vocabulary`] is an ordered token list whose line number is the token
//! id, with the five special tokens pinned at ids 0-4. Continuation pieces
//! carry the `##` prefix. Vocabularies are trained with [`train_wordpiece`]
//! and applied with greedy longest-match-first tokenization.

mod tokenizer;
mod trainer;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tokenizer::{fertility, pre_tokenize, Fertility, MAX_WORD_CHARS};
pub use trainer::{train_wordpiece, VocabTrainerConfig};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;
pub const NUM_SPECIALS: u32 = 5;

pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
pub const CONTINUATION_PREFIX: &str = "##";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrainError {
    #[error("training corpus is empty after pre-tokenization")]
    EmptyCorpus,
    #[error("vocab_size {requested} must exceed specials + alphabet ({minimum})")]
    VocabTooSmall { requested: usize, minimum: usize },
    #[error("min_pair_frequency must be at least 1")]
    BadMinFrequency,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("id {0} is out of range")]
    UnknownId(u32),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("line {line}: expected special token {expected}, found `{found}`")]
    MissingSpecial {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: duplicate token `{token}`")]
    Duplicate { line: usize, token: String },
    #[error("line {line}: malformed token `{token}`")]
    Malformed { line: usize, token: String },
}

/// Immutable subword vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    cased: bool,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens in id order. The first five entries must
    /// be the special tokens.
    pub fn from_tokens(tokens: Vec<String>, cased: bool) -> Result<Self, VocabError> {
        for (i, expected) in SPECIAL_TOKENS.iter().enumerate() {
            match tokens.get(i) {
                Some(t) if t == expected => {}
                other => {
                    return Err(VocabError::MissingSpecial {
                        line: i + 1,
                        expected,
                        found: other.cloned().unwrap_or_default(),
                    })
                }
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            let body = t.strip_prefix(CONTINUATION_PREFIX).unwrap_or(t);
            if body.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(VocabError::Malformed {
                    line: i + 1,
                    token: t.clone(),
                });
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(VocabError::Duplicate {
                    line: i + 1,
                    token: t.clone(),
                });
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            cased,
        })
    }

    /// Parses a BERT-style `vocab.txt` (one token per line).
    pub fn from_vocab_txt(text: &str, cased: bool) -> Result<Self, VocabError> {
        Self::from_tokens(text.lines().map(str::to_string).collect(), cased)
    }

    pub fn to_vocab_txt(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of the `vocab.txt` serialization.
    pub fn hash(&self) -> String {
        crate::sha256_hex(self.to_vocab_txt().as_bytes())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn cased(&self) -> bool {
        self.cased
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(id: u32) -> bool {
        id < NUM_SPECIALS
    }

    pub fn encode_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<u32>, EncodeError> {
        tokens
            .iter()
            .map(|t| {
                self.id(t.as_ref())
                    .ok_or_else(|| EncodeError::UnknownToken(t.as_ref().to_string()))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Result<Vec<String>, EncodeError> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .map(str::to_string)
                    .ok_or(EncodeError::UnknownId(id))
            })
            .collect()
    }

    /// Greedy longest-match-first WordPiece tokenization.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for word in pre_tokenize(text, self.cased) {
            self.tokenize_word(&word, &mut out);
        }
        out
    }

    pub fn tokenize_to_ids(&self, text: &str) -> Vec<u32> {
        self.tokenize(text)
            .iter()
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect()
    }

    fn tokenize_word(&self, word: &str, out: &mut Vec<String>) {
        let chars: Vec<(usize, char)> = word.char_indices().collect();
        if chars.len() > MAX_WORD_CHARS {
            out.push(SPECIAL_TOKENS[UNK as usize].to_string());
            return;
        }
        let offset = |i: usize| chars.get(i).map_or(word.len(), |&(o, _)| o);
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut candidate = String::with_capacity(word.len() + 2);
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(CONTINUATION_PREFIX);
                }
                candidate.push_str(&word[offset(start)..offset(end)]);
                if self.index.contains_key(&candidate) {
                    found = Some(candidate.clone());
                    break;
                }
                end -= 1;
            }
            match found {
                Some(piece) => {
                    pieces.push(piece);
                    start = end;
                }
                None => {
                    out.push(SPECIAL_TOKENS[UNK as usize].to_string());
                    return;
                }
            }
        }
        out.extend(pieces);
    }
}

/// Metadata written next to `vocab.txt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabSidecar {
    pub config: VocabTrainerConfig,
    pub corpus_hash: String,
    pub vocab_hash: String,
    pub size: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab(extra: &[&str]) -> Vocabulary {
        let tokens = SPECIAL_TOKENS
            .iter()
            .chain(extra)
            .map(|s| s.to_string())
            .collect();
        Vocabulary::from_tokens(tokens, true).unwrap()
    }

    #[test]
    fn greedy_longest_match() {
        let v = vocab(&["a", "ab", "##c", "##b"]);
        assert_eq!(v.tokenize("abc"), vec!["ab", "##c"]);
        assert_eq!(v.tokenize("ab"), vec!["ab"]);
        assert_eq!(v.tokenize("abz"), vec!["[UNK]"]);
        assert_eq!(v.tokenize("ab, abc"), vec!["ab", "[UNK]", "ab", "##c"]);
    }

    #[test]
    fn overlong_word_is_unknown() {
        let v = vocab(&["a", "##a"]);
        assert_eq!(v.tokenize(&"a".repeat(MAX_WORD_CHARS)).len(), MAX_WORD_CHARS);
        assert_eq!(v.tokenize(&"a".repeat(MAX_WORD_CHARS + 1)), vec!["[UNK]"]);
    }

    #[test]
    fn specials_layout_and_encoding() {
        let v = vocab(&["x"]);
        assert_eq!(v.encode_ids(&["[CLS]"]).unwrap(), vec![2]);
        assert_eq!(v.encode_ids::<&str>(&[]).unwrap(), Vec::<u32>::new());
        assert_eq!(v.decode(&[]).unwrap(), Vec::<String>::new());
        assert_eq!(
            v.encode_ids(&["nope"]),
            Err(EncodeError::UnknownToken("nope".into()))
        );
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            assert_eq!(v.id(s), Some(i as u32));
        }
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            Vocabulary::from_vocab_txt("[PAD]\n[UNK]\n", true),
            Err(VocabError::MissingSpecial { line: 3, .. })
        ));
        let dup = format!("{}\na\na\n", SPECIAL_TOKENS.join("\n"));
        assert!(matches!(
            Vocabulary::from_vocab_txt(&dup, true),
            Err(VocabError::Duplicate { line: 7, .. })
        ));
        let bare = format!("{}\n##\n", SPECIAL_TOKENS.join("\n"));
        assert!(matches!(
            Vocabulary::from_vocab_txt(&bare, true),
            Err(VocabError::Malformed { .. })
        ));
    }

    #[test]
    fn vocab_txt_round_trip() {
        let v = vocab(&["a", "##b", "çğ"]);
        let back = Vocabulary::from_vocab_txt(&v.to_vocab_txt(), true).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(ids in proptest::collection::vec(0u32..12, 0..40)) {
            let v = vocab(&["a", "b", "##a", "##b", "ab", "##ab", "ba"]);
            let tokens = v.decode(&ids).unwrap();
            prop_assert_eq!(v.encode_ids(&tokens).unwrap(), ids);
        }

        #[test]
        fn pieces_reassemble_word(word in "[abc]{1,12}") {
            let v = vocab(&["a", "b", "##a", "##b", "ab", "##ab", "ba", "##bab"]);
            let pieces = v.tokenize(&word);
            if pieces != ["[UNK]"] {
                let joined: String = pieces
                    .iter()
                    .enumerate()
                    .map(|(i, p)| if i == 0 { p.as_str() } else { p.strip_prefix("##").unwrap() })
                    .collect();
                prop_assert_eq!(joined, word);
            } else {
                prop_assert!(word.contains('c'));
            }
        }
    }
}
