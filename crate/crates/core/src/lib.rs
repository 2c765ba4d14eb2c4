//! Data preparation and evaluation toolkit for domain-adapted clinical BERT
//! pretraining.
//!
//! The pipeline runs in stages, each a module:
//!
//! * [`corpus`] cleans, de-identifies and deduplicates raw text and reports
//!   per-source statistics.
//! * [`vocab`] trains WordPiece vocabularies and tokenizes text.
//! * [`mixing`] cuts a small domain corpus and a large general corpus into
//!   equal-size chunks and interleaves them with the small side up-sampled.
//! * [`instances`] turns a chunk stream into masked-LM + next-sentence
//!   instances and stores them in checksummed record files.
//! * [`datasets`] models the 13-label head-CT report task: splitting,
//!   metrics and paired significance tests.
//! * [`tinylm`] is a small transformer encoder with hand-written backward
//!   passes that consumes the record files end to end.

pub mod config;
pub mod corpus;
pub mod datasets;
pub mod instances;
pub mod mixing;
pub mod seed;
pub mod synth;
pub mod tinylm;
pub mod vocab;

pub(crate) mod par;

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
