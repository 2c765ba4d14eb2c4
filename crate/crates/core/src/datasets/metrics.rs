use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, LabelVector, LABELS, NUM_LABELS};

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub id: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub id: String,
    pub labels: LabelVector,
}

/// Binarizes scores: a label is positive when its score is at least `threshold`.
pub fn threshold_scores(
    scored: &[ScoredPrediction],
    threshold: f64,
) -> Result<Vec<Prediction>, EvalError> {
    scored
        .iter()
        .map(|p| {
            if p.scores.len() != NUM_LABELS {
                return Err(EvalError::ScoreCount {
                    id: p.id.clone(),
                    found: p.scores.len(),
                });
            }
            Ok(Prediction {
                id: p.id.clone(),
                labels: std::array::from_fn(|l| u8::from(p.scores[l] >= threshold)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold positives.
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub run_id: String,
    pub per_label: Vec<LabelMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-label precision, recall and F1 with macro averages over all 13 labels.
///
/// Any vanishing denominator yields 0, including labels with no gold and no
/// predicted positives.
pub fn per_label_metrics(
    model: &str,
    run_id: &str,
    gold: &[(String, LabelVector)],
    predictions: &[Prediction],
) -> Result<MetricsReport, EvalError> {
    let mut by_id: HashMap<&str, &LabelVector> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if by_id.insert(p.id.as_str(), &p.labels).is_some() {
            return Err(EvalError::IdMismatch(format!("duplicate prediction `{}`", p.id)));
        }
    }
    if by_id.len() != gold.len() {
        return Err(EvalError::IdMismatch(format!(
            "{} predictions for {} gold reports",
            by_id.len(),
            gold.len()
        )));
    }
    let mut tp = [0usize; NUM_LABELS];
    let mut fp = [0usize; NUM_LABELS];
    let mut fn_ = [0usize; NUM_LABELS];
    for (id, g) in gold {
        let p = by_id
            .get(id.as_str())
            .ok_or_else(|| EvalError::IdMismatch(format!("no prediction for `{id}`")))?;
        for l in 0..NUM_LABELS {
            match (g[l], p[l]) {
                (1, 1) => tp[l] += 1,
                (0, 1) => fp[l] += 1,
                (1, 0) => fn_[l] += 1,
                _ => {}
            }
        }
    }
    let per_label: Vec<LabelMetrics> = (0..NUM_LABELS)
        .map(|l| {
            let precision = ratio(tp[l], tp[l] + fp[l]);
            let recall = ratio(tp[l], tp[l] + fn_[l]);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            LabelMetrics {
                label: LABELS[l].to_string(),
                precision,
                recall,
                f1,
                support: tp[l] + fn_[l],
                tp: tp[l],
                fp: fp[l],
                fn_: fn_[l],
            }
        })
        .collect();
    let mean = |f: fn(&LabelMetrics) -> f64| per_label.iter().map(f).sum::<f64>() / NUM_LABELS as f64;
    Ok(MetricsReport {
        model: model.to_string(),
        run_id: run_id.to_string(),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_label,
    })
}
