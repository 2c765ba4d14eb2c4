use std::collections::HashSet;
use std::path::PathBuf;

use clap::Args;
use radmix::datasets::{
    format_report, per_label_metrics, significance_test, stratified_split, threshold_scores, MetricsReport,
    ScoredPrediction, Split, SplitAssignment, LABELS,
};
use serde_json::json;

use crate::context::Ctx;
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Labeled `reports.jsonl`.
    #[arg(long)]
    reports: PathBuf,
    #[arg(long)]
    train: Option<f64>,
    #[arg(long)]
    validation: Option<f64>,
    #[arg(long)]
    test: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    reports: PathBuf,
    /// Split assignment; without it every report is scored.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    subset: Split,
    /// `predictions.jsonl` with 13 scores per report.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, default_value = "model")]
    model: String,
    #[arg(long, default_value = "run-0")]
    run_id: String,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics files written by `eval`.
    #[arg(long = "metrics", required = true)]
    metrics: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SigtestArgs {
    /// Metrics files of the first system, one per run.
    #[arg(long = "a", required = true)]
    a: Vec<PathBuf>,
    /// Metrics files of the second system, paired with `--a` in order.
    #[arg(long = "b", required = true)]
    b: Vec<PathBuf>,
    /// Compare one label's F1 instead of macro F1.
    #[arg(long)]
    label: Option<String>,
}

pub fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|e: radmix::datasets::DatasetError| e.to_string())
}

pub fn split(ctx: &mut Ctx, args: SplitArgs) -> Result<()> {
    let f = &mut ctx.config.split;
    for (slot, v) in [(&mut f.train, args.train), (&mut f.validation, args.validation), (&mut f.test, args.test)] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    let reports = ctx.read_reports(&args.reports)?;
    let assignment = stratified_split(&reports, ctx.config.split, ctx.seed())?;
    ctx.write_json(&args.out, &assignment)?;
    ctx.write_sidecar(&args.out, json!({"reports": reports.len()}))?;
    ctx.log_summary(json!({
        "train": assignment.count(Split::Train),
        "validation": assignment.count(Split::Validation),
        "test": assignment.count(Split::Test),
    }));
    Ok(())
}

fn metrics_table(m: &MetricsReport) -> String {
    let mut out = format!("{:<26} {:>9} {:>9} {:>9} {:>8}\n", "label", "precision", "recall", "f1", "support");
    for l in &m.per_label {
        out.push_str(&format!(
            "{:<26} {:>9.4} {:>9.4} {:>9.4} {:>8}\n",
            l.label, l.precision, l.recall, l.f1, l.support
        ));
    }
    out.push_str(&format!(
        "{:<26} {:>9.4} {:>9.4} {:>9.4}\n",
        "macro", m.macro_precision, m.macro_recall, m.macro_f1
    ));
    out
}

pub fn eval(ctx: &mut Ctx, args: EvalArgs) -> Result<()> {
    if let Some(t) = args.threshold {
        ctx.config.finetune.threshold = t;
    }
    let reports = ctx.read_reports(&args.reports)?;
    let selected: Vec<_> = match &args.split {
        Some(p) => {
            let assignment: SplitAssignment = ctx.read_json(p)?;
            assignment.select(&reports, args.subset).into_iter().cloned().collect()
        }
        None => reports,
    };
    let gold: Vec<(String, _)> = selected.iter().map(|r| (r.id.clone(), r.labels)).collect();
    let wanted: HashSet<&str> = gold.iter().map(|(id, _)| id.as_str()).collect();
    let scored: Vec<ScoredPrediction> = ctx.read_jsonl(&args.predictions)?;
    let total = scored.len();
    let scored: Vec<ScoredPrediction> = scored.into_iter().filter(|p| wanted.contains(p.id.as_str())).collect();
    let predictions = threshold_scores(&scored, ctx.config.finetune.threshold)?;
    let metrics = per_label_metrics(&args.model, &args.run_id, &gold, &predictions)?;
    ctx.write_json(&args.out, &metrics)?;
    ctx.write_sidecar(&args.out, json!({"threshold": ctx.config.finetune.threshold, "subset": args.subset}))?;
    ctx.emit(&metrics_table(&metrics), &serde_json::to_value(&metrics).expect("serializable"));
    ctx.log_summary(json!({
        "gold": gold.len(),
        "predictions": total,
        "ignored_predictions": total - scored.len(),
        "macro_f1": metrics.macro_f1,
    }));
    Ok(())
}

fn read_metrics(ctx: &mut Ctx, paths: &[PathBuf]) -> Result<Vec<MetricsReport>> {
    paths.iter().map(|p| ctx.read_json(p)).collect()
}

pub fn report(ctx: &mut Ctx, args: ReportArgs) -> Result<()> {
    let metrics = read_metrics(ctx, &args.metrics)?;
    let tables = format_report(&metrics)?;
    if let Some(out) = &args.out {
        ctx.write_json(out, &tables)?;
        ctx.write_sidecar(out, json!({"runs": metrics.len()}))?;
    }
    ctx.emit(&tables.to_text(), &serde_json::to_value(&tables).expect("serializable"));
    ctx.log_summary(json!({"runs": metrics.len(), "models": tables.models.len()}));
    Ok(())
}

pub fn sigtest(ctx: &mut Ctx, args: SigtestArgs) -> Result<()> {
    let label = match &args.label {
        Some(name) => Some(
            LABELS
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| CliError::Invalid(format!("unknown label `{name}`")))?,
        ),
        None => None,
    };
    let score = |m: &MetricsReport| label.map_or(m.macro_f1, |l| m.per_label[l].f1);
    let a: Vec<f64> = read_metrics(ctx, &args.a)?.iter().map(score).collect();
    let b: Vec<f64> = read_metrics(ctx, &args.b)?.iter().map(score).collect();
    let p = significance_test(&a, &b)?;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let metric = args.label.clone().unwrap_or_else(|| "macro_f1".into());
    let value = json!({"metric": metric, "n": a.len(), "mean_a": mean(&a), "mean_b": mean(&b), "p_value": p});
    let text = format!(
        "{metric}: mean a {:.4}, mean b {:.4}, n {}, p = {p:.6}\n",
        mean(&a),
        mean(&b),
        a.len()
    );
    ctx.emit(&text, &value);
    ctx.log_summary(json!({"pairs": a.len()}));
    Ok(())
}
