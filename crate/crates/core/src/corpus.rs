//! Corpus ingestion, cleaning, de-identification, deduplication and
//! per-source statistics.
//!
//! Documents arrive either as blank-line separated `.txt` files or as JSON
//! lines `{"id", "text", "source"}`. Cleaning flattens every document to one
//! whitespace-normalized line and drops anything shorter than `min_chars`
//! characters (counted after normalization).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{origin}: input is not valid UTF-8 (byte offset {offset})")]
    InvalidUtf8 { origin: String, offset: usize },
    #[error("{origin}:{line}: {message}")]
    Malformed {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("unknown source domain `{0}`")]
    UnknownSource(String),
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("invalid pattern `{pattern}`: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("invalid placeholder `{0}`; expected `[UPPER_CASE]`")]
    Placeholder(String),
}

/// Domain a corpus document was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    General,
    Biomedical,
    RadiologyTheses,
    ClinicalReports,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::General,
        Source::Biomedical,
        Source::RadiologyTheses,
        Source::ClinicalReports,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::General => "general",
            Source::Biomedical => "biomedical",
            Source::RadiologyTheses => "radiology-theses",
            Source::ClinicalReports => "clinical-reports",
        }
    }

    /// Human-readable domain label used in manifest rows.
    pub fn domain_label(self) -> &'static str {
        match self {
            Source::General => "General",
            Source::Biomedical => "Biomedical",
            Source::RadiologyTheses => "Radiology",
            Source::ClinicalReports => "Clinical Radiology",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| IngestError::UnknownSource(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub id: String,
    pub text: String,
    pub source: Source,
    pub char_count: usize,
    pub token_count: usize,
}

impl CleanDocument {
    fn with_text(id: String, source: Source, text: String) -> Self {
        CleanDocument {
            char_count: text.chars().count(),
            token_count: text.split_whitespace().count(),
            id,
            text,
            source,
        }
    }
}

/// Decodes `bytes` as UTF-8, reporting the first invalid offset.
pub fn decode_utf8(origin: &str, bytes: Vec<u8>) -> Result<String, IngestError> {
    String::from_utf8(bytes).map_err(|e| IngestError::InvalidUtf8 {
        origin: origin.to_string(),
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Splits a `.txt` corpus into documents on blank lines. Document ids are
/// `{stem}-{index}`.
pub fn parse_txt(stem: &str, text: &str, source: Source) -> Vec<RawDocument> {
    let mut docs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let flush = |current: &mut Vec<&str>, docs: &mut Vec<RawDocument>| {
        if !current.is_empty() {
            docs.push(RawDocument {
                id: format!("{stem}-{}", docs.len()),
                text: current.join("\n"),
                source,
            });
            current.clear();
        }
    };
    for line in text.lines() {
        if line.trim().is_empty() {
            flush(&mut current, &mut docs);
        } else {
            current.push(line);
        }
    }
    flush(&mut current, &mut docs);
    docs
}

/// Parses JSON lines of `{"id", "text", "source"}`; ids must be unique.
pub fn parse_jsonl(origin: &str, text: &str) -> Result<Vec<RawDocument>, IngestError> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(line).map_err(|e| IngestError::Malformed {
            origin: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(doc.id.clone()) {
            return Err(IngestError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Minimum character count, applied after normalization.
    pub min_chars: usize,
    /// Encoding-artifact patterns; every match is replaced by a space.
    pub strip_patterns: Vec<String>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            min_chars: 100,
            strip_patterns: default_strip_patterns(),
        }
    }
}

pub fn default_strip_patterns() -> Vec<String> {
    [
        // DICOM-style tag header lines, e.g. "(0010,0010) PatientName ..."
        r"(?m)^[ \t]*\([0-9A-Fa-f]{4},[0-9A-Fa-f]{4}\)[^\n]*$",
        r"\x0C",
        r"\*{3,}",
        r"-{3,}",
        r"={3,}",
        r"_{3,}",
        // RTF control words left behind by report editors
        r"\\(?:par|line|tab|pard)\b",
        r"&nbsp;",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanOutcome {
    Kept(CleanDocument),
    Filtered { id: String, char_count: usize },
}

/// Compiled form of a [`CleaningConfig`].
#[derive(Debug, Clone)]
pub struct Cleaner {
    min_chars: usize,
    strip: Vec<Regex>,
}

impl Cleaner {
    pub fn new(cfg: &CleaningConfig) -> Result<Self, IngestError> {
        let strip = cfg
            .strip_patterns
            .iter()
            .map(|p| {
                Regex::new(p).map_err(|source| IngestError::Pattern {
                    pattern: p.clone(),
                    source,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Cleaner {
            min_chars: cfg.min_chars,
            strip,
        })
    }

    fn pass(&self, text: &str) -> String {
        let mut text: String = text.nfc().collect();
        for re in &self.strip {
            if re.is_match(&text) {
                text = re.replace_all(&text, " ").into_owned();
            }
        }
        collapse_whitespace(&text)
    }

    /// Normalizes text to a fixpoint, so cleaning its own output is a no-op.
    pub fn normalize(&self, text: &str) -> String {
        let mut current = self.pass(text);
        // Every pass is length non-increasing; a handful of rounds always suffices.
        for _ in 0..16 {
            let next = self.pass(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    pub fn clean(&self, doc: &RawDocument) -> CleanOutcome {
        let text = self.normalize(&doc.text);
        let char_count = text.chars().count();
        if char_count < self.min_chars {
            return CleanOutcome::Filtered {
                id: doc.id.clone(),
                char_count,
            };
        }
        CleanOutcome::Kept(CleanDocument::with_text(doc.id.clone(), doc.source, text))
    }
}

/// Maps every whitespace character to a single space, drops other control
/// characters, collapses runs and trims both ends.
fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
        } else if c.is_control() {
            continue;
        } else {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.push(c);
        }
    }
    out
}

/// Cleans one document with the given threshold and the default artifact patterns.
pub fn clean_document(doc: &RawDocument, min_chars: usize) -> CleanOutcome {
    let cfg = CleaningConfig {
        min_chars,
        ..CleaningConfig::default()
    };
    Cleaner::new(&cfg)
        .expect("default strip patterns compile")
        .clean(doc)
}

/// Additional check run on each regex match before it is replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchValidator {
    /// 11-digit Turkish national identity number checksum.
    NationalIdChecksum,
}

impl MatchValidator {
    fn accepts(self, s: &str) -> bool {
        match self {
            MatchValidator::NationalIdChecksum => national_id_is_valid(s),
        }
    }
}

/// Checks the two trailing check digits of an 11-digit national id.
pub fn national_id_is_valid(s: &str) -> bool {
    let d: Vec<i64> = s.chars().filter_map(|c| c.to_digit(10)).map(i64::from).collect();
    if d.len() != 11 || s.chars().count() != 11 || d[0] == 0 {
        return false;
    }
    let odd = d[0] + d[2] + d[4] + d[6] + d[8];
    let even = d[1] + d[3] + d[5] + d[7];
    let d10 = (7 * odd - even).rem_euclid(10);
    let d11 = d[..10].iter().sum::<i64>().rem_euclid(10);
    d[9] == d10 && d[10] == d11
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeidRule {
    pub name: String,
    pub pattern: String,
    pub placeholder: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validator: Option<MatchValidator>,
}

impl DeidRule {
    pub fn new(name: &str, pattern: &str, placeholder: &str) -> Self {
        DeidRule {
            name: name.to_string(),
            pattern: pattern.to_string(),
            placeholder: placeholder.to_string(),
            validator: None,
        }
    }
}

/// Shipped rules, applied in this order.
pub fn default_deid_rules() -> Vec<DeidRule> {
    vec![
        DeidRule {
            validator: Some(MatchValidator::NationalIdChecksum),
            ..DeidRule::new("national-id", r"\b[1-9][0-9]{10}\b", "[ID]")
        },
        DeidRule::new(
            "date",
            r"\b(?:0?[1-9]|[12][0-9]|3[01])[./-](?:0?[1-9]|1[0-2])[./-](?:19|20)?[0-9]{2}\b",
            "[DATE]",
        ),
        DeidRule::new(
            "phone",
            r"(?:\+90[ -]?)?\(?\b0?[2-5][0-9]{2}\)?[ -][0-9]{3}[ -][0-9]{2}[ -][0-9]{2}\b",
            "[PHONE]",
        ),
        DeidRule::new(
            "honorific-name",
            r"\b(?:Dr|Prof|Doç|Uzm|Op|Sn|Bay|Bayan|Hasta)\.?[ ]+\p{Lu}\p{Ll}+(?:[ ]+\p{Lu}\p{Ll}+)?",
            "[NAME]",
        ),
    ]
}

#[derive(Debug, Clone)]
struct CompiledRule {
    regex: Regex,
    placeholder: String,
    validator: Option<MatchValidator>,
}

/// Compiled, ordered de-identification rule set.
#[derive(Debug, Clone)]
pub struct Deidentifier {
    rules: Vec<CompiledRule>,
}

impl Deidentifier {
    pub fn new(rules: &[DeidRule]) -> Result<Self, IngestError> {
        let placeholder_shape = Regex::new(r"^\[[A-Z_]+\]$").expect("static regex");
        let rules = rules
            .iter()
            .map(|r| {
                if !placeholder_shape.is_match(&r.placeholder) {
                    return Err(IngestError::Placeholder(r.placeholder.clone()));
                }
                let regex = Regex::new(&r.pattern).map_err(|source| IngestError::Pattern {
                    pattern: r.pattern.clone(),
                    source,
                })?;
                Ok(CompiledRule {
                    regex,
                    placeholder: r.placeholder.clone(),
                    validator: r.validator,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Deidentifier { rules })
    }

    /// Returns the rewritten text and the number of substitutions.
    pub fn apply_text(&self, text: &str) -> (String, usize) {
        let mut text = text.to_string();
        let mut total = 0;
        for rule in &self.rules {
            let mut count = 0;
            let replaced = rule.regex.replace_all(&text, |caps: &regex::Captures<'_>| {
                let m = &caps[0];
                match rule.validator {
                    Some(v) if !v.accepts(m) => m.to_string(),
                    _ => {
                        count += 1;
                        rule.placeholder.clone()
                    }
                }
            });
            if count > 0 {
                text = replaced.into_owned();
                total += count;
            }
        }
        (text, total)
    }

    pub fn apply(&self, doc: &CleanDocument) -> (CleanDocument, usize) {
        let (text, count) = self.apply_text(&doc.text);
        (
            CleanDocument::with_text(doc.id.clone(), doc.source, text),
            count,
        )
    }
}

pub fn deidentify(
    doc: &CleanDocument,
    rules: &[DeidRule],
) -> Result<(CleanDocument, usize), IngestError> {
    Ok(Deidentifier::new(rules)?.apply(doc))
}

/// Key used for exact duplicate detection: SHA-256 of the lowercased,
/// whitespace-normalized text. The combining dot that Unicode lowercasing
/// leaves behind for `İ` is dropped so that `İ` and `i` compare equal.
pub fn dedup_key(text: &str) -> [u8; 32] {
    let folded = text.to_lowercase().replace("i\u{307}", "i");
    let mut hasher = Sha256::new();
    for (i, word) in folded.split_whitespace().enumerate() {
        if i > 0 {
            hasher.update(b" ");
        }
        hasher.update(word.as_bytes());
    }
    hasher.finalize().into()
}

/// Keeps the first occurrence of each normalized text, in input order.
pub fn dedup_corpus(docs: Vec<CleanDocument>) -> (Vec<CleanDocument>, usize) {
    let mut seen = HashSet::new();
    let before = docs.len();
    let kept: Vec<_> = docs
        .into_iter()
        .filter(|d| seen.insert(dedup_key(&d.text)))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub source: Source,
    pub domain: String,
    pub document_count: usize,
    pub byte_size: u64,
    pub token_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub rows: Vec<ManifestRow>,
    pub created: String,
    pub config_hash: String,
}

/// Aggregates per-source counts. Rows appear in [`Source::ALL`] order and only
/// for sources that have documents.
pub fn corpus_stats(docs: &[CleanDocument], created: &str, config_hash: &str) -> CorpusManifest {
    let mut by_source: BTreeMap<Source, ManifestRow> = BTreeMap::new();
    for doc in docs {
        let row = by_source.entry(doc.source).or_insert_with(|| ManifestRow {
            source: doc.source,
            domain: doc.source.domain_label().to_string(),
            document_count: 0,
            byte_size: 0,
            token_count: 0,
        });
        row.document_count += 1;
        row.byte_size += doc.text.len() as u64;
        row.token_count += doc.text.split_whitespace().count() as u64;
    }
    CorpusManifest {
        rows: by_source.into_values().collect(),
        created: created.to_string(),
        config_hash: config_hash.to_string(),
    }
}

impl CorpusManifest {
    /// Renders the manifest as a `Corpus | Size | N tokens | Domain` table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<18} {:>14} {:>14} {:>10}  {}\n",
            "Corpus", "Size (bytes)", "N tokens", "Documents", "Domain"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<18} {:>14} {:>14} {:>10}  {}\n",
                r.source.as_str(),
                r.byte_size,
                r.token_count,
                r.document_count,
                r.domain
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(text: &str) -> RawDocument {
        RawDocument {
            id: "d".into(),
            text: text.into(),
            source: Source::ClinicalReports,
        }
    }

    fn clean(text: &str) -> CleanDocument {
        CleanDocument::with_text("d".into(), Source::ClinicalReports, text.into())
    }

    /// Walks characters one at a time: whitespace opens a gap, anything else is copied.
    fn reference_normalize(text: &str) -> String {
        let mut out = String::new();
        let mut gap = false;
        for c in text.chars() {
            match c {
                ' ' | '\n' | '\r' | '\t' => gap = true,
                _ => {
                    if gap && !out.is_empty() {
                        out.push(' ');
                    }
                    gap = false;
                    out.push(c);
                }
            }
        }
        out
    }

    #[test]
    fn short_report_is_filtered() {
        let text = "a".repeat(50);
        assert_eq!(
            clean_document(&raw(&text), 100),
            CleanOutcome::Filtered {
                id: "d".into(),
                char_count: 50
            }
        );
    }

    #[test]
    fn clean_text_passes_through() {
        let text = "Beyin parankimi normal. ".repeat(8);
        let text = text.trim();
        assert_eq!(text.chars().count(), 191);
        match clean_document(&raw(text), 100) {
            CleanOutcome::Kept(d) => {
                assert_eq!(d.text, text);
                assert_eq!(d.char_count, 191);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn newlines_match_char_walk_reference() {
        let text = format!("satır1\nsatır2\r\n  satır3 {}", "x".repeat(100));
        let CleanOutcome::Kept(d) = clean_document(&raw(&text), 100) else {
            panic!("filtered")
        };
        assert_eq!(d.text, reference_normalize(&text));
        assert!(d.text.starts_with("satır1 satır2 satır3 "));
    }

    #[test]
    fn threshold_applies_after_normalization() {
        // 120 raw chars, but only 99 after collapsing the padding.
        let text = format!("{}{}", "b".repeat(99), " ".repeat(21));
        assert!(matches!(
            clean_document(&raw(&text), 100),
            CleanOutcome::Filtered { char_count: 99, .. }
        ));
    }

    #[test]
    fn strips_report_artifacts() {
        let text = format!(
            "(0010,0010) PatientName^X\n********\nBulgu: normal.\x0c---- {}",
            "y".repeat(100)
        );
        let CleanOutcome::Kept(d) = clean_document(&raw(&text), 10) else {
            panic!("filtered")
        };
        assert!(d.text.starts_with("Bulgu: normal. y"), "{}", d.text);
    }

    #[test]
    fn date_rule() {
        let (d, n) = deidentify(&clean("Tetkik 01.02.2016 tarihinde yapıldı."), &default_deid_rules()).unwrap();
        assert_eq!(d.text, "Tetkik [DATE] tarihinde yapıldı.");
        assert_eq!(n, 1);
    }

    /// Independent check-digit computation over the first nine digits.
    fn id_with_checksum(first9: [i64; 9]) -> String {
        let odd: i64 = first9.iter().step_by(2).sum();
        let even: i64 = first9.iter().skip(1).step_by(2).sum();
        let d10 = (7 * odd - even).rem_euclid(10);
        let d11 = (first9.iter().sum::<i64>() + d10).rem_euclid(10);
        first9
            .iter()
            .chain([d10, d11].iter())
            .map(|d| char::from(b'0' + *d as u8))
            .collect()
    }

    #[test]
    fn national_id_checksum() {
        let valid = id_with_checksum([1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(valid, "12345678950");
        assert!(national_id_is_valid(&valid));
        let mut invalid = valid.clone().into_bytes();
        invalid[10] = if invalid[10] == b'9' { b'0' } else { invalid[10] + 1 };
        let invalid = String::from_utf8(invalid).unwrap();
        assert!(!national_id_is_valid(&invalid));

        let rules = default_deid_rules();
        let (d, n) = deidentify(&clean(&format!("TC {valid} hasta")), &rules).unwrap();
        assert_eq!((d.text.as_str(), n), ("TC [ID] hasta", 1));
        let (d, n) = deidentify(&clean(&format!("TC {invalid} hasta")), &rules).unwrap();
        assert_eq!(d.text, format!("TC {invalid} hasta"));
        assert_eq!(n, 0);
    }

    #[test]
    fn phone_and_name_rules() {
        let rules = default_deid_rules();
        let (d, n) = deidentify(
            &clean("Dr. Ayşe Yılmaz aradı, tel 0232 390 12 34."),
            &rules,
        )
        .unwrap();
        assert_eq!(d.text, "[NAME] aradı, tel [PHONE].");
        assert_eq!(n, 2);
    }

    #[test]
    fn empty_rule_list_is_identity() {
        let doc = clean("01.02.2016 Dr. Ayşe");
        let (d, n) = deidentify(&doc, &[]).unwrap();
        assert_eq!((d, n), (doc, 0));
    }

    #[test]
    fn rejects_bad_placeholder() {
        let rule = DeidRule::new("x", "a", "<X>");
        assert!(matches!(
            Deidentifier::new(&[rule]),
            Err(IngestError::Placeholder(_))
        ));
    }

    #[test]
    fn dedup_cases() {
        let a = CleanDocument::with_text("1".into(), Source::General, "Ana metin burada".into());
        let a2 = CleanDocument::with_text("2".into(), Source::General, "Ana metin burada".into());
        let b = CleanDocument::with_text("3".into(), Source::General, "Başka metin".into());
        let spaced =
            CleanDocument::with_text("4".into(), Source::General, "ana  METİN   burada".into());

        let (kept, removed) = dedup_corpus(vec![a.clone(), a2, b.clone()]);
        assert_eq!((kept, removed), (vec![a.clone(), b.clone()], 1));

        let (kept, removed) = dedup_corpus(vec![a.clone(), spaced]);
        assert_eq!((kept, removed), (vec![a.clone()], 1));

        let (kept, removed) = dedup_corpus(vec![a.clone(), b.clone()]);
        assert_eq!((kept, removed), (vec![a, b], 0));
    }

    #[test]
    fn stats_counts_whitespace_tokens() {
        let docs = vec![CleanDocument::with_text("x".into(), Source::General, "a b c".into())];
        let m = corpus_stats(&docs, "t", "h");
        assert_eq!(m.rows.len(), 1);
        assert_eq!(m.rows[0].token_count, 3);
        assert_eq!(m.rows[0].byte_size, 5);
        assert!(corpus_stats(&[], "t", "h").rows.is_empty());
        assert!(m.to_table().starts_with("Corpus"));
    }

    #[test]
    fn txt_and_jsonl_parsing() {
        let docs = parse_txt("f", "s1\ns2\n\n\ns3\n", Source::General);
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].text, "s1\ns2");
        assert_eq!(docs[1].id, "f-1");

        let jsonl = r#"{"id":"a","text":"t","source":"radiology-theses"}"#;
        let docs = parse_jsonl("x", jsonl).unwrap();
        assert_eq!(docs[0].source, Source::RadiologyTheses);
        let dup = format!("{jsonl}\n{jsonl}");
        assert!(matches!(parse_jsonl("x", &dup), Err(IngestError::DuplicateId(_))));
        assert!(matches!(
            parse_jsonl("x", r#"{"id":"a","text":"t","source":"news"}"#),
            Err(IngestError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            decode_utf8("x", vec![b'a', 0xff]),
            Err(IngestError::InvalidUtf8 { offset: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(text in "[a-zçğıöşü \\n\\r\\t\\*\\-=(),0-9A-F\\x0c]{0,200}") {
            let cleaner = Cleaner::new(&CleaningConfig { min_chars: 0, ..Default::default() }).unwrap();
            let once = cleaner.normalize(&text);
            prop_assert_eq!(cleaner.normalize(&once), once.clone());
            prop_assert!(!once.contains(['\n', '\r', '\t']));
            prop_assert!(!once.contains("  "));
            prop_assert_eq!(once.trim(), once.as_str());
        }

        #[test]
        fn deid_is_idempotent_and_bounded(
            words in proptest::collection::vec(
                prop_oneof![
                    Just("01.02.2016".to_string()),
                    Just("Dr. Ali Veli".to_string()),
                    Just("12345678950".to_string()),
                    Just("12345678951".to_string()),
                    Just("0232 390 12 34".to_string()),
                    "[a-z]{1,8}",
                ],
                0..20,
            )
        ) {
            let doc = clean(&words.join(" "));
            let deid = Deidentifier::new(&default_deid_rules()).unwrap();
            let (once, n) = deid.apply(&doc);
            let (twice, m) = deid.apply(&once);
            prop_assert_eq!(m, 0);
            prop_assert_eq!(twice.text, once.text.clone());
            let max_placeholder = "[PHONE]".len();
            prop_assert!(once.text.len() <= doc.text.len() + n * max_placeholder);
        }

        #[test]
        fn dedup_idempotent_and_order_preserving(
            texts in proptest::collection::vec("[ab ]{0,6}", 0..30)
        ) {
            let docs: Vec<_> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| CleanDocument::with_text(i.to_string(), Source::General, t.clone()))
                .collect();
            let (kept, _) = dedup_corpus(docs.clone());
            let (again, removed) = dedup_corpus(kept.clone());
            prop_assert_eq!(removed, 0);
            prop_assert_eq!(&again, &kept);
            let ids: Vec<usize> = kept.iter().map(|d| d.id.parse().unwrap()).collect();
            prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
            // every pair of survivors differs after normalization, and every
            // dropped doc equals an earlier survivor
            let norm = |t: &str| t.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
            for (i, x) in kept.iter().enumerate() {
                for y in &kept[i + 1..] {
                    prop_assert_ne!(norm(&x.text), norm(&y.text));
                }
            }
            for d in &docs {
                let survivor = kept.iter().find(|k| norm(&k.text) == norm(&d.text)).unwrap();
                prop_assert!(survivor.id.parse::<usize>().unwrap() <= d.id.parse::<usize>().unwrap());
            }
        }
    }
}
