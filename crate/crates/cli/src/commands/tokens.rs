use std::path::PathBuf;

use clap::{Args, ValueEnum};
use radmix::instances::{create_instances, debug_json, RecordSidecar, RecordWriter};
use radmix::mixing::{
    build_mix_plan_with, interleave, split_into_chunks, tokenize_document, unmixed, Chunk, MixError,
    StreamEntry,
};
use radmix::sha256_hex;
use radmix::vocab::{fertility as measure_fertility, train_wordpiece, VocabSidecar, Vocabulary};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::context::Ctx;
use crate::error::Result;

#[derive(Debug, Args)]
pub struct VocabTrainArgs {
    /// Cleaned `.jsonl` corpora.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Keep case instead of lowercasing.
    #[arg(long)]
    cased: bool,
    /// Where to write `vocab.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FertilityArgs {
    #[arg(long)]
    vocab: PathBuf,
    /// Cleaned `.jsonl` corpora, measured one by one and together.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    vocab: PathBuf,
    /// Large general-domain corpora (cleaned `.jsonl`).
    #[arg(long = "general", required = true)]
    general: Vec<PathBuf>,
    /// Small domain corpora (cleaned `.jsonl`).
    #[arg(long = "domain", required = true)]
    domain: Vec<PathBuf>,
    /// Desired domain:general exposure ratio.
    #[arg(long)]
    ratio: Option<f64>,
    /// Directory for `plan.json`, `chunks.jsonl` and `stream.jsonl`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Domain and general chunks, balanced and interleaved.
    Simultaneous,
    /// Domain chunks only.
    TaskAdaptive,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Simultaneous => "simultaneous",
            Mode::TaskAdaptive => "task-adaptive",
        }
    }
}

#[derive(Debug, Args)]
pub struct InstancesArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long = "domain", required = true)]
    domain: Vec<PathBuf>,
    /// General corpora; required in simultaneous mode.
    #[arg(long = "general")]
    general: Vec<PathBuf>,
    #[arg(long)]
    dupe_factor: Option<usize>,
    #[arg(long)]
    max_seq_len: Option<usize>,
    /// Record file to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the first instances as readable JSON lines.
    #[arg(long)]
    debug_json: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    debug_count: usize,
}

#[derive(Serialize)]
struct ChunkLine<'a> {
    corpus: &'static str,
    index: usize,
    #[serde(flatten)]
    chunk: &'a Chunk,
}

fn chunk_corpora(ctx: &mut Ctx, paths: &[PathBuf], vocab: &Vocabulary) -> Result<Vec<Chunk>> {
    let docs = ctx.read_clean_docs(paths)?;
    let tokenized: Vec<_> = docs.par_iter().map(|d| tokenize_document(d, vocab)).collect();
    Ok(split_into_chunks(&tokenized, ctx.config.mixing.chunk_tokens)?)
}

pub fn vocab_train(ctx: &mut Ctx, args: VocabTrainArgs) -> Result<()> {
    if let Some(n) = args.vocab_size {
        ctx.config.vocab.vocab_size = n;
    }
    if args.cased {
        ctx.config.vocab.cased = true;
    }
    let docs = ctx.read_clean_docs(&args.inputs)?;
    let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
    let vocab = train_wordpiece(&texts, &ctx.config.vocab)?;
    ctx.write(&args.out, vocab.to_vocab_txt().as_bytes())?;
    let sidecar = VocabSidecar {
        config: ctx.config.vocab.clone(),
        corpus_hash: sha256_hex(texts.join("\n").as_bytes()),
        vocab_hash: vocab.hash(),
        size: vocab.len(),
    };
    ctx.write_sidecar(&args.out, &sidecar)?;
    ctx.log_summary(json!({"documents": docs.len(), "vocab_size": vocab.len()}));
    Ok(())
}

pub fn fertility(ctx: &mut Ctx, args: FertilityArgs) -> Result<()> {
    let vocab = ctx.read_vocab(&args.vocab)?;
    let mut rows = Vec::new();
    let mut all_texts = Vec::new();
    for path in &args.inputs {
        let docs = ctx.read_clean_docs(std::slice::from_ref(path))?;
        let texts: Vec<String> = docs.into_iter().map(|d| d.text).collect();
        rows.push((path.display().to_string(), measure_fertility(&texts, &vocab)));
        all_texts.extend(texts);
    }
    if rows.len() > 1 {
        rows.push(("total".to_string(), measure_fertility(&all_texts, &vocab)));
    }
    let mut text = format!("{:<40} {:>10} {:>10} {:>10} {:>9}\n", "corpus", "words", "subwords", "fertility", "unk_rate");
    for (name, f) in &rows {
        text.push_str(&format!(
            "{:<40} {:>10} {:>10} {:>10.4} {:>9.5}\n",
            name, f.words, f.subwords, f.fertility, f.unk_rate
        ));
    }
    let value = json!({
        "vocab_hash": vocab.hash(),
        "corpora": rows.iter().map(|(n, f)| json!({"corpus": n, "fertility": f})).collect::<Vec<_>>(),
    });
    if let Some(out) = &args.out {
        ctx.write_json(out, &value)?;
        ctx.write_sidecar(out, json!({"vocab_hash": vocab.hash()}))?;
    }
    ctx.emit(&text, &value);
    ctx.log_summary(json!({"corpora": args.inputs.len()}));
    Ok(())
}

pub fn mix(ctx: &mut Ctx, args: MixArgs) -> Result<()> {
    if let Some(r) = args.ratio {
        ctx.config.mixing.target_ratio = r;
    }
    let vocab = ctx.read_vocab(&args.vocab)?;
    let large = chunk_corpora(ctx, &args.general, &vocab)?;
    let small = chunk_corpora(ctx, &args.domain, &vocab)?;
    let mixing = &ctx.config.mixing;
    let plan = build_mix_plan_with(large.len(), small.len(), ctx.seed(), mixing.target_ratio, mixing.tolerance)?;
    let stream = interleave(&plan, &large, &small)?;
    if !plan.within_tolerance() {
        ctx.warn(&format!(
            "mix imbalance {:.4} exceeds tolerance {:.4}",
            plan.imbalance, plan.tolerance
        ));
    }
    let dir = &args.out_dir;
    ctx.write_json(&dir.join("plan.json"), &plan)?;
    let chunk_lines: Vec<ChunkLine> = large
        .iter()
        .enumerate()
        .map(|(index, chunk)| ChunkLine { corpus: "large", index, chunk })
        .chain(small.iter().enumerate().map(|(index, chunk)| ChunkLine { corpus: "small", index, chunk }))
        .collect();
    ctx.write_jsonl(&dir.join("chunks.jsonl"), &chunk_lines)?;
    ctx.write_jsonl(&dir.join("stream.jsonl"), &stream)?;
    ctx.write_sidecar(&dir.join("plan.json"), json!({"vocab_hash": vocab.hash()}))?;
    ctx.log_summary(json!({
        "large_chunks": plan.large_chunk_count,
        "small_chunks": plan.small_chunk_count,
        "repeat_factor": plan.repeat_factor,
        "stream_len": stream.len(),
        "imbalance": plan.imbalance,
    }));
    Ok(())
}

pub fn instances(ctx: &mut Ctx, args: InstancesArgs) -> Result<()> {
    let seed = ctx.seed();
    let inst = &mut ctx.config.instances;
    inst.seed = seed;
    if let Some(n) = args.max_seq_len {
        inst.max_seq_len = n;
    }
    inst.dupe_factor = match (args.dupe_factor, args.mode) {
        (Some(n), _) => n,
        (None, Mode::TaskAdaptive) => ctx.config.task_adaptive_dupe_factor,
        (None, Mode::Simultaneous) => inst.dupe_factor,
    };
    ctx.config.instances.validate()?;
    if args.mode == Mode::Simultaneous && args.general.is_empty() {
        return Err(MixError::EmptyGeneral.into());
    }
    if args.mode == Mode::TaskAdaptive && !args.general.is_empty() {
        ctx.warn("task-adaptive mode ignores --general");
    }

    let vocab = ctx.read_vocab(&args.vocab)?;
    let small = chunk_corpora(ctx, &args.domain, &vocab)?;
    let (large, stream): (Vec<Chunk>, Vec<StreamEntry>) = match args.mode {
        Mode::Simultaneous => {
            let large = chunk_corpora(ctx, &args.general, &vocab)?;
            let mixing = &ctx.config.mixing;
            let plan = build_mix_plan_with(large.len(), small.len(), seed, mixing.target_ratio, mixing.tolerance)?;
            if !plan.within_tolerance() {
                ctx.warn(&format!(
                    "mix imbalance {:.4} exceeds tolerance {:.4}",
                    plan.imbalance, plan.tolerance
                ));
            }
            let stream = interleave(&plan, &large, &small)?;
            (large, stream)
        }
        Mode::TaskAdaptive => {
            if small.is_empty() {
                return Err(MixError::EmptyDomain.into());
            }
            (Vec::new(), unmixed(&small))
        }
    };
    let refs: Vec<&Chunk> = stream.iter().map(|e| e.resolve(&large, &small)).collect();
    let (records, stats) = create_instances(&refs, &vocab, &ctx.config.instances)?;
    let mut writer = RecordWriter::new(Vec::new());
    for r in &records {
        writer.write(r).expect("writing to memory cannot fail");
    }
    ctx.write(&args.out, &writer.finish().expect("writing to memory cannot fail"))?;
    let sidecar = RecordSidecar {
        command: ctx.command.to_string(),
        mode: args.mode.as_str().to_string(),
        config_hash: ctx.config_hash(),
        seed,
        vocab_hash: vocab.hash(),
        config: ctx.config.instances.clone(),
        stats,
    };
    ctx.write_sidecar(&args.out, &sidecar)?;
    if let Some(path) = &args.debug_json {
        let items: Vec<_> = records.iter().take(args.debug_count).map(|r| debug_json(r, &vocab)).collect();
        ctx.write_jsonl(path, &items)?;
    }
    ctx.log_summary(serde_json::to_value(stats).expect("serializable"));
    Ok(())
}
