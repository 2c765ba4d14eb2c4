use std::path::PathBuf;

use clap::Args;
use radmix::synth::{domain_corpus, general_corpus, task_reports, SynonymSubset};
use serde_json::json;

use crate::context::Ctx;
use crate::error::Result;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for `general.jsonl`, `domain.jsonl` and `reports.jsonl`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 400)]
    general: usize,
    #[arg(long, default_value_t = 400)]
    domain: usize,
    #[arg(long, default_value_t = 300)]
    reports: usize,
    /// Probability of each finding in a labeled report.
    #[arg(long, default_value_t = 0.2)]
    finding_rate: f64,
}

pub fn synth(ctx: &mut Ctx, args: SynthArgs) -> Result<()> {
    let seed = ctx.seed();
    let general = general_corpus(seed, args.general);
    let domain = domain_corpus(seed, args.domain);
    let reports = task_reports(seed, args.reports, args.finding_rate, SynonymSubset::All);
    ctx.write_jsonl(&args.out_dir.join("general.jsonl"), &general)?;
    ctx.write_jsonl(&args.out_dir.join("domain.jsonl"), &domain)?;
    let lines: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
    ctx.write(&args.out_dir.join("reports.jsonl"), lines.as_bytes())?;
    for (name, count) in [("general", general.len()), ("domain", domain.len()), ("reports", reports.len())] {
        let details = json!({"documents": count, "finding_rate": args.finding_rate});
        ctx.write_sidecar(&args.out_dir.join(format!("{name}.jsonl")), details)?;
    }
    ctx.log_summary(json!({"general": general.len(), "domain": domain.len(), "reports": reports.len()}));
    Ok(())
}
