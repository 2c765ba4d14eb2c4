use std::collections::HashSet;
use std::path::PathBuf;

use clap::Args;
use radmix::corpus::{
    corpus_stats, dedup_corpus, default_deid_rules, CleanOutcome, Cleaner, DeidRule, Deidentifier,
    IngestError, Source,
};
use serde_json::json;

use crate::context::{created_timestamp, Ctx};
use crate::error::Result;

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Raw `.txt` or `.jsonl` corpora. Defaults to the configured inputs.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    /// Source domain of `.txt` inputs.
    #[arg(long, value_parser = parse_source)]
    source: Option<Source>,
    #[arg(long)]
    min_chars: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeidentArgs {
    #[arg(long)]
    input: PathBuf,
    /// JSON array of rules replacing the shipped set.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Where to write `manifest.json`.
    #[arg(long)]
    out: PathBuf,
}

pub fn parse_source(s: &str) -> std::result::Result<Source, String> {
    s.parse().map_err(|e: IngestError| e.to_string())
}

pub fn clean(ctx: &mut Ctx, args: CleanArgs) -> Result<()> {
    if let Some(m) = args.min_chars {
        ctx.config.cleaning.min_chars = m;
    }
    let sources: Vec<(PathBuf, Option<Source>)> = if args.inputs.is_empty() {
        Source::ALL
            .iter()
            .flat_map(|&s| {
                ctx.config
                    .inputs
                    .for_source(s)
                    .iter()
                    .map(move |p| (p.clone(), Some(s)))
            })
            .collect()
    } else {
        args.inputs.iter().map(|p| (p.clone(), args.source)).collect()
    };
    if sources.is_empty() {
        return Err(crate::error::CliError::Invalid(
            "no inputs: pass --input or list files under [inputs] in the configuration".into(),
        ));
    }
    let cleaner = Cleaner::new(&ctx.config.cleaning)?;
    let mut seen = HashSet::new();
    let (mut read, mut kept, mut filtered) = (0usize, Vec::new(), 0usize);
    for (path, source) in &sources {
        for doc in ctx.read_raw_docs(path, *source)? {
            if !seen.insert(doc.id.clone()) {
                return Err(IngestError::DuplicateId(doc.id).into());
            }
            read += 1;
            match cleaner.clean(&doc) {
                CleanOutcome::Kept(d) => kept.push(d),
                CleanOutcome::Filtered { .. } => filtered += 1,
            }
        }
    }
    ctx.write_jsonl(&args.out, &kept)?;
    let counts = json!({"read": read, "kept": kept.len(), "filtered": filtered});
    ctx.write_sidecar(&args.out, json!({"cleaning": ctx.config.cleaning, "counts": counts}))?;
    ctx.log_summary(counts);
    Ok(())
}

pub fn deident(ctx: &mut Ctx, args: DeidentArgs) -> Result<()> {
    let rules: Vec<DeidRule> = match &args.rules {
        Some(p) => ctx.read_json(p)?,
        None => default_deid_rules(),
    };
    let deid = Deidentifier::new(&rules)?;
    let docs = ctx.read_clean_docs(std::slice::from_ref(&args.input))?;
    let mut replacements = 0;
    let out: Vec<_> = docs
        .iter()
        .map(|d| {
            let (doc, n) = deid.apply(d);
            replacements += n;
            doc
        })
        .collect();
    ctx.write_jsonl(&args.out, &out)?;
    let counts = json!({"documents": out.len(), "replacements": replacements});
    ctx.write_sidecar(&args.out, json!({"rules": rules, "counts": counts}))?;
    ctx.log_summary(counts);
    Ok(())
}

pub fn dedup(ctx: &mut Ctx, args: DedupArgs) -> Result<()> {
    let docs = ctx.read_clean_docs(&args.inputs)?;
    let before = docs.len();
    let (kept, removed) = dedup_corpus(docs);
    ctx.write_jsonl(&args.out, &kept)?;
    let counts = json!({"read": before, "kept": kept.len(), "removed": removed});
    ctx.write_sidecar(&args.out, json!({"counts": counts}))?;
    ctx.log_summary(counts);
    Ok(())
}

pub fn stats(ctx: &mut Ctx, args: StatsArgs) -> Result<()> {
    let docs = ctx.read_clean_docs(&args.inputs)?;
    let manifest = corpus_stats(&docs, &created_timestamp(), &ctx.config_hash());
    ctx.write_json(&args.out, &manifest)?;
    ctx.write_sidecar(&args.out, json!({"documents": docs.len()}))?;
    ctx.emit(&manifest.to_table(), &serde_json::to_value(&manifest).expect("serializable"));
    ctx.log_summary(json!({"documents": docs.len(), "sources": manifest.rows.len()}));
    Ok(())
}
