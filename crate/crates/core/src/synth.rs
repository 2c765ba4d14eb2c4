//! Synthetic corpora and labeled reports for tests, fixtures and the demo.
//!
//! A fixed made-up lexicon stands in for the private corpora. General text
//! draws Zipf-distributed words from an ASCII inventory plus a few rare loan
//! words that use the full alphabet. Domain text reads like head-CT reports:
//! location and verb words, domain filler words built from letters that are
//! rare in general text, and finding sentences.
//!
//! Each of the 12 findings has four synonymous words and three cue words.
//! Domain pretraining documents put a finding's cues next to any of its
//! synonyms, so co-occurrence ties the four synonyms together. Labeled task
//! reports never contain cues, and the synonym subset is selectable, which
//! lets a test fine-tune on one pair of synonyms and evaluate on the other.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{RawDocument, Source};
use crate::datasets::{LabeledReport, LabelVector, NO_FINDINGS, NUM_LABELS, REFERENCE_POSITIVES, REFERENCE_SIZE};
use crate::seed::{self, stage, StageRng};

const LEXICON_SEED: u64 = 0x7261_646d_6978;
const NUM_FINDINGS: usize = NUM_LABELS - 1;

pub const NO_FINDINGS_SENTENCE: &str = "patolojik bulgu saptanmadı.";

const KIND_GENERAL: u64 = 1;
const KIND_DOMAIN: u64 = 2;
const KIND_TASK: u64 = 3;
const KIND_REFERENCE: u64 = 4;

pub struct Lexicon {
    pub general: Vec<String>,
    pub domain: Vec<String>,
    pub locations: Vec<String>,
    pub verbs: Vec<String>,
    /// Four interchangeable words per finding label.
    pub synonyms: Vec<[String; 4]>,
    /// Words that only ever appear next to one finding, in pretraining text.
    pub cues: Vec<[String; 3]>,
}

/// Which synonyms of each finding a labeled report may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynonymSubset {
    /// Synonyms 0 and 1.
    First,
    /// Synonyms 2 and 3.
    Second,
    All,
}

impl SynonymSubset {
    fn range(self) -> std::ops::Range<usize> {
        match self {
            SynonymSubset::First => 0..2,
            SynonymSubset::Second => 2..4,
            SynonymSubset::All => 0..4,
        }
    }
}

struct WordMaker {
    rng: StageRng,
    seen: HashSet<String>,
}

impl WordMaker {
    fn word(&mut self, onsets: &[&str], vowels: &[&str], syllables: std::ops::RangeInclusive<usize>) -> String {
        loop {
            let n = self.rng.gen_range(syllables.clone());
            let mut w = String::new();
            for _ in 0..n {
                w.push_str(onsets.choose(&mut self.rng).unwrap());
                w.push_str(vowels.choose(&mut self.rng).unwrap());
            }
            if self.rng.gen_bool(0.4) {
                w.push_str(onsets.choose(&mut self.rng).unwrap());
            }
            if w.chars().count() >= 3 && self.seen.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, n: usize, onsets: &[&str], vowels: &[&str], syl: std::ops::RangeInclusive<usize>) -> Vec<String> {
        (0..n).map(|_| self.word(onsets, vowels, syl.clone())).collect()
    }
}

const GENERAL_ONSETS: [&str; 13] = ["b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "y", "z"];
const GENERAL_VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const DOMAIN_ONSETS: [&str; 9] = ["ç", "ş", "ğ", "h", "f", "v", "c", "j", "tr"];
const DOMAIN_VOWELS: [&str; 3] = ["ı", "ö", "ü"];
const ALL_ONSETS: [&str; 22] = [
    "b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "y", "z", "ç", "ş", "ğ", "h", "f", "v", "c", "j", "tr",
];
const ALL_VOWELS: [&str; 8] = ["a", "e", "i", "o", "u", "ı", "ö", "ü"];

fn build_lexicon() -> Lexicon {
    let mut m = WordMaker {
        rng: seed::rng(LEXICON_SEED, &[stage::SYNTH]),
        seen: HashSet::new(),
    };
    m.seen.extend(NO_FINDINGS_SENTENCE.trim_end_matches('.').split(' ').map(String::from));
    let mut general = m.words(200, &GENERAL_ONSETS, &GENERAL_VOWELS, 2..=3);
    // Rare loan words at the tail of the frequency ranking give general text
    // the full alphabet.
    general.extend(m.words(30, &ALL_ONSETS, &ALL_VOWELS, 2..=3));
    let domain = m.words(80, &DOMAIN_ONSETS, &DOMAIN_VOWELS, 2..=3);
    let locations = m.words(10, &DOMAIN_ONSETS, &DOMAIN_VOWELS, 2..=3);
    let verbs = m.words(6, &DOMAIN_ONSETS, &DOMAIN_VOWELS, 2..=3);
    let synonyms = (0..NUM_FINDINGS)
        .map(|_| std::array::from_fn(|_| m.word(&DOMAIN_ONSETS, &DOMAIN_VOWELS, 2..=3)))
        .collect();
    let cues = (0..NUM_FINDINGS)
        .map(|_| std::array::from_fn(|_| m.word(&DOMAIN_ONSETS, &DOMAIN_VOWELS, 2..=3)))
        .collect();
    Lexicon {
        general,
        domain,
        locations,
        verbs,
        synonyms,
        cues,
    }
}

pub fn lexicon() -> &'static Lexicon {
    static LEXICON: OnceLock<Lexicon> = OnceLock::new();
    LEXICON.get_or_init(build_lexicon)
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / (r as f64 + 1.0))).expect("non-empty")
}

fn sentence(words: Vec<&str>) -> String {
    format!("{}.", words.join(" "))
}

fn general_document(rng: &mut StageRng) -> String {
    let lex = lexicon();
    let dist = zipf(lex.general.len());
    let sentences: Vec<String> = (0..rng.gen_range(4..=10))
        .map(|_| {
            let n = rng.gen_range(6..=14);
            sentence((0..n).map(|_| lex.general[dist.sample(rng)].as_str()).collect())
        })
        .collect();
    sentences.join(" ")
}

fn normal_sentence(rng: &mut StageRng) -> String {
    let lex = lexicon();
    let mut words = vec![lex.locations.choose(rng).unwrap().as_str()];
    for _ in 0..rng.gen_range(2..=5) {
        words.push(lex.domain.choose(rng).unwrap());
    }
    words.push(lex.verbs.choose(rng).unwrap());
    sentence(words)
}

fn finding_sentence(rng: &mut StageRng, label: usize, subset: SynonymSubset, with_cues: bool) -> String {
    let lex = lexicon();
    let syn = lex.synonyms[label][rng.gen_range(subset.range())].as_str();
    let loc = lex.locations.choose(rng).unwrap().as_str();
    let verb = lex.verbs.choose(rng).unwrap().as_str();
    if with_cues {
        let cues = &lex.cues[label];
        return sentence(vec![cues[rng.gen_range(0..3)].as_str(), syn, cues[rng.gen_range(0..3)].as_str(), verb]);
    }
    let mut words = vec![loc];
    if rng.gen_bool(0.5) {
        words.push(lex.domain.choose(rng).unwrap());
    }
    words.push(syn);
    words.push(verb);
    sentence(words)
}

/// Report text for a label vector: normal sentences plus one sentence per
/// finding (or the no-findings sentence), in shuffled order.
fn report_text(rng: &mut StageRng, labels: &LabelVector, subset: SynonymSubset, with_cues: bool) -> String {
    let mut sentences: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| normal_sentence(rng)).collect();
    for (l, &v) in labels[..NUM_FINDINGS].iter().enumerate() {
        if v == 1 {
            sentences.push(finding_sentence(rng, l, subset, with_cues));
        }
    }
    if labels[NO_FINDINGS] == 1 {
        sentences.push(NO_FINDINGS_SENTENCE.to_string());
    }
    sentences.shuffle(rng);
    sentences.join(" ")
}

fn random_labels(rng: &mut StageRng, finding_rate: f64) -> LabelVector {
    let mut labels = [0u8; NUM_LABELS];
    for l in labels[..NUM_FINDINGS].iter_mut() {
        *l = u8::from(rng.gen_bool(finding_rate));
    }
    if labels.iter().all(|&v| v == 0) {
        labels[NO_FINDINGS] = 1;
    }
    labels
}

/// `n` general-domain documents of 4 to 10 sentences.
pub fn general_corpus(seed: u64, n: usize) -> Vec<RawDocument> {
    (0..n)
        .map(|i| {
            let mut rng = seed::rng(seed, &[stage::SYNTH, KIND_GENERAL, i as u64]);
            RawDocument {
                id: format!("general-{seed}-{i}"),
                text: general_document(&mut rng),
                source: Source::General,
            }
        })
        .collect()
}

/// `n` domain reports for pretraining. Findings occur with probability 0.3
/// each and carry their cue words.
pub fn domain_corpus(seed: u64, n: usize) -> Vec<RawDocument> {
    (0..n)
        .map(|i| {
            let mut rng = seed::rng(seed, &[stage::SYNTH, KIND_DOMAIN, i as u64]);
            let labels = random_labels(&mut rng, 0.3);
            RawDocument {
                id: format!("report-{seed}-{i}"),
                text: report_text(&mut rng, &labels, SynonymSubset::All, true),
                source: Source::ClinicalReports,
            }
        })
        .collect()
}

/// Labeled reports without cue words. Each finding is present independently
/// with `finding_rate`; reports without findings get `No Findings`.
pub fn task_reports(seed: u64, n: usize, finding_rate: f64, subset: SynonymSubset) -> Vec<LabeledReport> {
    (0..n)
        .map(|i| {
            let mut rng = seed::rng(seed, &[stage::SYNTH, KIND_TASK, i as u64]);
            let labels = random_labels(&mut rng, finding_rate);
            LabeledReport {
                id: format!("task-{seed}-{i}"),
                text: report_text(&mut rng, &labels, subset, false),
                labels,
            }
        })
        .collect()
}

/// 2,000 reports whose per-label positive counts equal the reference
/// distribution exactly. `No Findings` reports are drawn first; every finding
/// then gets its positives among the remaining reports.
pub fn reference_reports(seed: u64) -> Vec<LabeledReport> {
    let mut rng = seed::rng(seed, &[stage::SYNTH, KIND_REFERENCE]);
    let mut order: Vec<usize> = (0..REFERENCE_SIZE).collect();
    order.shuffle(&mut rng);
    let no_findings = REFERENCE_POSITIVES[NO_FINDINGS];
    let mut labels = vec![[0u8; NUM_LABELS]; REFERENCE_SIZE];
    for &i in &order[..no_findings] {
        labels[i][NO_FINDINGS] = 1;
    }
    let rest = &order[no_findings..];
    for (l, &count) in REFERENCE_POSITIVES[..NUM_FINDINGS].iter().enumerate() {
        for &i in rest.choose_multiple(&mut rng, count) {
            labels[i][l] = 1;
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, labels)| {
            let mut rng = seed::rng(seed, &[stage::SYNTH, KIND_REFERENCE, i as u64]);
            LabeledReport {
                id: format!("ref-{seed}-{i:04}"),
                text: report_text(&mut rng, &labels, SynonymSubset::All, false),
                labels,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_words_are_unique() {
        let lex = lexicon();
        let mut all: Vec<&String> = lex.general.iter().chain(&lex.domain).chain(&lex.locations).chain(&lex.verbs).collect();
        all.extend(lex.synonyms.iter().flatten());
        all.extend(lex.cues.iter().flatten());
        let set: HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), all.len());
        assert!(lex.general[..200].iter().all(|w| w.is_ascii()));
    }

    #[test]
    fn reference_counts_are_exact() {
        let reports = reference_reports(3);
        assert_eq!(reports.len(), REFERENCE_SIZE);
        for l in 0..NUM_LABELS {
            let n: usize = reports.iter().map(|r| r.labels[l] as usize).sum();
            assert_eq!(n, REFERENCE_POSITIVES[l]);
        }
        for r in &reports {
            r.validate().unwrap();
        }
    }

    #[test]
    fn task_reports_use_requested_synonyms_and_no_cues() {
        let lex = lexicon();
        for r in task_reports(1, 50, 0.3, SynonymSubset::Second) {
            r.validate().unwrap();
            let words: HashSet<&str> = r.text.split(|c: char| c == ' ' || c == '.').collect();
            for l in 0..NUM_FINDINGS {
                assert!(!words.contains(lex.synonyms[l][0].as_str()));
                assert!(!words.contains(lex.synonyms[l][1].as_str()));
                assert!(lex.cues[l].iter().all(|c| !words.contains(c.as_str())));
                let present = lex.synonyms[l][2..].iter().any(|s| words.contains(s.as_str()));
                assert_eq!(present, r.labels[l] == 1);
            }
            assert_eq!(r.text.contains(NO_FINDINGS_SENTENCE), r.labels[NO_FINDINGS] == 1);
        }
    }

    #[test]
    fn documents_survive_length_filter() {
        for d in general_corpus(2, 30) {
            assert!(d.text.chars().count() >= 100, "{}", d.text);
        }
        // short reports without findings fall under the default threshold
        let domain = domain_corpus(2, 200);
        let long = domain.iter().filter(|d| d.text.chars().count() >= 100).count();
        assert!(long >= 120, "{long}");
        assert_eq!(general_corpus(5, 3), general_corpus(5, 3));
    }
}
