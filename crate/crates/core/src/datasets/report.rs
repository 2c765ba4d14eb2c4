use serde::{Deserialize, Serialize};

use super::{EvalError, MetricsReport, LABELS, NUM_LABELS};

/// One row of the model comparison table. Precision, recall and F1 are
/// macro-over-labels per run, then averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub runs: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Macro F1 of each run, in input order.
    pub run_macro_f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelF1Row {
    pub label: String,
    /// Mean F1 over runs, one entry per model in [`ComparisonTables::models`] order.
    pub f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTables {
    pub models: Vec<ModelRow>,
    pub labels: Vec<LabelF1Row>,
}

pub fn format_report(reports: &[MetricsReport]) -> Result<ComparisonTables, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut names: Vec<&str> = Vec::new();
    for r in reports {
        if !names.contains(&r.model.as_str()) {
            names.push(&r.model);
        }
    }
    let groups: Vec<Vec<&MetricsReport>> = names
        .iter()
        .map(|n| reports.iter().filter(|r| r.model == *n).collect())
        .collect();
    let mean = |xs: &[&MetricsReport], f: &dyn Fn(&MetricsReport) -> f64| {
        xs.iter().map(|r| f(r)).sum::<f64>() / xs.len() as f64
    };
    let models = names
        .iter()
        .zip(&groups)
        .map(|(name, runs)| ModelRow {
            model: name.to_string(),
            runs: runs.len(),
            precision: mean(runs, &|r| r.macro_precision),
            recall: mean(runs, &|r| r.macro_recall),
            f1: mean(runs, &|r| r.macro_f1),
            run_macro_f1: runs.iter().map(|r| r.macro_f1).collect(),
        })
        .collect();
    let labels = (0..NUM_LABELS)
        .map(|l| LabelF1Row {
            label: LABELS[l].to_string(),
            f1: groups
                .iter()
                .map(|runs| mean(runs, &|r| r.per_label[l].f1))
                .collect(),
        })
        .collect();
    Ok(ComparisonTables { models, labels })
}

impl ComparisonTables {
    /// Pipe-separated text rendering with four decimals.
    pub fn to_text(&self) -> String {
        let width = self
            .models
            .iter()
            .map(|m| m.model.len())
            .chain(LABELS.iter().map(|l| l.len()))
            .max()
            .unwrap_or(5);
        let mut out = format!(
            "{:<width$} | Precision | Recall | F1 Score\n",
            "Model"
        );
        for m in &self.models {
            out.push_str(&format!(
                "{:<width$} | {:<9.4} | {:<6.4} | {:.4}\n",
                m.model, m.precision, m.recall, m.f1
            ));
        }
        out.push('\n');
        out.push_str(&format!("{:<width$}", "Category"));
        for m in &self.models {
            out.push_str(&format!(" | {}", m.model));
        }
        out.push('\n');
        for row in &self.labels {
            out.push_str(&format!("{:<width$}", row.label));
            for (f1, m) in row.f1.iter().zip(&self.models) {
                out.push_str(&format!(" | {:<w$.4}", f1, w = m.model.len()));
            }
            out.push('\n');
        }
        out
    }
}

/// Parses the model table section of [`ComparisonTables::to_text`] back into
/// `(model, precision, recall, f1)` rows.
pub fn parse_model_table(text: &str) -> Vec<(String, f64, f64, f64)> {
    text.lines()
        .skip(1)
        .take_while(|l| !l.trim().is_empty())
        .filter_map(|line| {
            let cells: Vec<&str> = line.split('|').map(str::trim).collect();
            match cells.as_slice() {
                [m, p, r, f] => Some((
                    m.to_string(),
                    p.parse().ok()?,
                    r.parse().ok()?,
                    f.parse().ok()?,
                )),
                _ => None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{per_label_metrics, Prediction};

    fn run(model: &str, run_id: &str, flip: usize) -> MetricsReport {
        let gold: Vec<(String, [u8; NUM_LABELS])> = (0..20)
            .map(|i| (i.to_string(), std::array::from_fn(|l| u8::from((i + l) % 3 == 0))))
            .collect();
        let preds: Vec<Prediction> = gold
            .iter()
            .enumerate()
            .map(|(i, (id, g))| {
                let mut labels = *g;
                if i < flip {
                    labels[i % NUM_LABELS] ^= 1;
                }
                Prediction { id: id.clone(), labels }
            })
            .collect();
        per_label_metrics(model, run_id, &gold, &preds).unwrap()
    }

    #[test]
    fn perfect_single_model() {
        let t = format_report(&[run("tiny", "0", 0)]).unwrap();
        assert_eq!(t.models.len(), 1);
        let m = &t.models[0];
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let text = t.to_text();
        assert!(text.starts_with("Model"));
        assert!(text.lines().next().unwrap().ends_with("| Precision | Recall | F1 Score"));
        assert!(text.contains("1.0000"));
    }

    #[test]
    fn groups_runs_by_model() {
        let t = format_report(&[run("a", "0", 0), run("b", "0", 5), run("a", "1", 3)]).unwrap();
        assert_eq!(t.models.iter().map(|m| m.model.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(t.models[0].runs, 2);
        assert_eq!(t.labels.len(), NUM_LABELS);
        assert_eq!(t.labels[0].f1.len(), 2);
        let expected = (1.0 + t.models[0].run_macro_f1[1]) / 2.0;
        assert!((t.models[0].f1 - expected).abs() < 1e-15);
        assert!(format_report(&[]).is_err());
    }

    #[test]
    fn json_text_json_keeps_four_decimals() {
        let t = format_report(&[run("a", "0", 4), run("bb", "0", 9)]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: ComparisonTables = serde_json::from_str(&json).unwrap();
        let parsed = parse_model_table(&back.to_text());
        assert_eq!(parsed.len(), 2);
        let r4 = |x: f64| (x * 1e4).round() / 1e4;
        for (row, (name, p, r, f)) in back.models.iter().zip(parsed) {
            assert_eq!(row.model, name);
            assert_eq!((r4(row.precision), r4(row.recall), r4(row.f1)), (p, r, f));
        }
    }
}
