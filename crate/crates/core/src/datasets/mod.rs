//! Head-CT report classification task: the 13-label schema, labeled report
//! files, stratified splitting, metrics and significance testing.

mod metrics;
mod report;
mod significance;
mod split;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{
    per_label_metrics, threshold_scores, LabelMetrics, MetricsReport, Prediction, ScoredPrediction,
};
pub use report::{format_report, parse_model_table, ComparisonTables, LabelF1Row, ModelRow};
pub use significance::{significance_test, significance_test_sampled, EXACT_MAX_N};
pub use split::{stratified_split, Split, SplitAssignment, SplitFractions};

pub const NUM_LABELS: usize = 13;

/// Observation labels in their fixed order. The last one marks the absence
/// of every other finding.
pub const LABELS: [&str; NUM_LABELS] = [
    "Intraventricular",
    "Gliosis",
    "Epidural",
    "Hydrocephalus",
    "Encephalomalacia",
    "Chronic ischemic changes",
    "Lacuna",
    "Leukoaraiosis",
    "Mega cisterna magna",
    "Meningioma",
    "Subarachnoid Bleeding",
    "Subdural",
    "No Findings",
];

pub const NO_FINDINGS: usize = NUM_LABELS - 1;

/// Positive counts per label in the 2,000-report annotated set, in
/// [`LABELS`] order.
pub const REFERENCE_POSITIVES: [usize; NUM_LABELS] =
    [22, 54, 51, 70, 177, 951, 138, 49, 15, 39, 209, 227, 299];
pub const REFERENCE_SIZE: usize = 2000;

pub type LabelVector = [u8; NUM_LABELS];

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("{origin}:{line}: {message}")]
    Malformed {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("report `{id}`: unknown label `{label}`")]
    UnknownLabel { id: String, label: String },
    #[error("report `{id}`: missing label `{label}`")]
    MissingLabel { id: String, label: &'static str },
    #[error("report `{id}`: label `{label}` has value {value}, expected 0 or 1")]
    NotBinary {
        id: String,
        label: String,
        value: i64,
    },
    #[error("report `{id}`: `No Findings` is set together with another finding")]
    NoFindingsConflict { id: String },
    #[error("duplicate report id `{0}`")]
    DuplicateId(String),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction ids do not match gold ids: {0}")]
    IdMismatch(String),
    #[error("paired score vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least one paired observation")]
    Empty,
    #[error("prediction `{id}` has {found} scores, expected {NUM_LABELS}")]
    ScoreCount { id: String, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledReport {
    pub id: String,
    pub text: String,
    pub labels: LabelVector,
}

#[derive(Serialize, Deserialize)]
struct ReportLine {
    id: String,
    text: String,
    labels: BTreeMap<String, i64>,
}

impl LabeledReport {
    /// Checks the mutual exclusion between `No Findings` and every finding.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.labels[NO_FINDINGS] == 1 && self.labels[..NO_FINDINGS].iter().any(|&v| v == 1) {
            return Err(DatasetError::NoFindingsConflict {
                id: self.id.clone(),
            });
        }
        if let Some((i, &v)) = self.labels.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(DatasetError::NotBinary {
                id: self.id.clone(),
                label: LABELS[i].to_string(),
                value: v as i64,
            });
        }
        Ok(())
    }

    pub fn to_json_line(&self) -> String {
        let line = ReportLine {
            id: self.id.clone(),
            text: self.text.clone(),
            labels: LABELS
                .iter()
                .zip(self.labels)
                .map(|(n, v)| (n.to_string(), v as i64))
                .collect(),
        };
        serde_json::to_string(&line).expect("serializable")
    }
}

/// Parses `reports.jsonl`, validating label names, binary values and the
/// `No Findings` exclusivity rule.
pub fn parse_reports(origin: &str, text: &str) -> Result<Vec<LabeledReport>, DatasetError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: ReportLine = serde_json::from_str(raw).map_err(|e| DatasetError::Malformed {
            origin: origin.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(unknown) = line.labels.keys().find(|k| !LABELS.contains(&k.as_str())) {
            return Err(DatasetError::UnknownLabel {
                id: line.id,
                label: unknown.clone(),
            });
        }
        let mut labels = [0u8; NUM_LABELS];
        for (j, name) in LABELS.iter().enumerate() {
            let v = *line
                .labels
                .get(*name)
                .ok_or_else(|| DatasetError::MissingLabel {
                    id: line.id.clone(),
                    label: name,
                })?;
            if v != 0 && v != 1 {
                return Err(DatasetError::NotBinary {
                    id: line.id,
                    label: name.to_string(),
                    value: v,
                });
            }
            labels[j] = v as u8;
        }
        let report = LabeledReport {
            id: line.id,
            text: line.text,
            labels,
        };
        report.validate()?;
        if !seen.insert(report.id.clone()) {
            return Err(DatasetError::DuplicateId(report.id));
        }
        out.push(report);
    }
    Ok(out)
}
