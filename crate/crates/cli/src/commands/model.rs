use std::path::{Path, PathBuf};

use clap::Args;
use radmix::datasets::{LabeledReport, Split, SplitAssignment};
use radmix::instances::{PretrainInstance, RecordReader, RecordSidecar};
use radmix::tinylm::{
    check_vocab_hash, decode_checkpoint, encode_checkpoint, encode_report, fine_tune_multilabel, loss_curve_csv,
    predict as score, pretrain as run_pretrain, Adam, FineTuneExample, ModelError, TrainState,
};
use radmix::vocab::Vocabulary;
use serde_json::{json, Value};

use super::eval::parse_split;
use crate::context::{sidecar_path, Ctx};
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Record file written by `instances`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    steps: Option<u64>,
    /// Continue from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Loss curve CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("init").required(true).args(["checkpoint", "scratch"])))]
pub struct FinetuneArgs {
    /// Pretrained checkpoint to start from.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Start from a fresh initialization instead.
    #[arg(long)]
    scratch: bool,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    reports: PathBuf,
    /// Split assignment; training uses its train subset.
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    reports: PathBuf,
    /// Split assignment; without it every report is scored.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    subset: Split,
    /// `predictions.jsonl` to write.
    #[arg(long)]
    out: PathBuf,
}

fn read_checkpoint(ctx: &mut Ctx, path: &Path) -> Result<TrainState> {
    let bytes = ctx.read(path)?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        ModelError::Checkpoint(m) => CliError::Parse {
            path: path.to_path_buf(),
            message: m,
        },
        other => other.into(),
    })
}

fn read_instances(ctx: &mut Ctx, path: &Path) -> Result<Vec<PretrainInstance>> {
    let bytes = ctx.read(path)?;
    Ok(RecordReader::new(bytes.as_slice()).collect::<std::result::Result<_, _>>()?)
}

fn examples(reports: &[&LabeledReport], vocab: &Vocabulary, max_seq_len: usize) -> Vec<FineTuneExample> {
    reports
        .iter()
        .map(|r| encode_report(&r.id, &r.text, r.labels, vocab, max_seq_len))
        .collect()
}

pub fn pretrain(ctx: &mut Ctx, args: PretrainArgs) -> Result<()> {
    if let Some(s) = args.steps {
        ctx.config.pretrain.steps = s;
    }
    let vocab = ctx.read_vocab(&args.vocab)?;
    // Records carry the hash of the vocabulary they were built with.
    if let Ok(text) = std::fs::read_to_string(sidecar_path(&args.records)) {
        let meta: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: sidecar_path(&args.records),
            message: e.to_string(),
        })?;
        if let Ok(sidecar) = serde_json::from_value::<RecordSidecar>(meta["details"].clone()) {
            check_vocab_hash(&sidecar.vocab_hash, &vocab.hash())?;
        }
    }
    let instances = read_instances(ctx, &args.records)?;
    let config = ctx.config.model.to_config(vocab.len());
    let mut state = match &args.resume {
        Some(path) => {
            let state = read_checkpoint(ctx, path)?;
            check_vocab_hash(&state.vocab_hash, &vocab.hash())?;
            if state.params.config != config {
                return Err(CliError::Invalid(format!(
                    "{}: checkpoint model settings differ from the configuration",
                    path.display()
                )));
            }
            state
        }
        None => TrainState::new(&config, ctx.seed(), &vocab.hash())?,
    };
    let start = state.step();
    let curve = run_pretrain(&mut state, &instances, &ctx.config.pretrain.optimizer, ctx.config.pretrain.steps)?;
    ctx.write(&args.out, &encode_checkpoint(&state))?;
    let curve_path = args.curve.clone().unwrap_or_else(|| {
        let mut name = args.out.file_name().unwrap_or_default().to_os_string();
        name.push(".loss.csv");
        args.out.with_file_name(name)
    });
    ctx.write(&curve_path, loss_curve_csv(&curve).as_bytes())?;
    let last = curve.last().map(|r| r.total);
    ctx.write_sidecar(
        &args.out,
        json!({
            "model": config,
            "vocab_hash": vocab.hash(),
            "start_step": start,
            "end_step": state.step(),
            "final_loss": last,
        }),
    )?;
    ctx.log_summary(json!({
        "instances": instances.len(),
        "start_step": start,
        "end_step": state.step(),
        "final_loss": last,
    }));
    Ok(())
}

pub fn finetune(ctx: &mut Ctx, args: FinetuneArgs) -> Result<()> {
    if let Some(e) = args.epochs {
        ctx.config.finetune.epochs = e;
    }
    let vocab = ctx.read_vocab(&args.vocab)?;
    let params = match &args.checkpoint {
        Some(path) => {
            let state = read_checkpoint(ctx, path)?;
            check_vocab_hash(&state.vocab_hash, &vocab.hash())?;
            state.params
        }
        None => TrainState::new(&ctx.config.model.to_config(vocab.len()), ctx.seed(), &vocab.hash())?.params,
    };
    let reports = ctx.read_reports(&args.reports)?;
    let assignment: SplitAssignment = ctx.read_json(&args.split)?;
    let train = examples(&assignment.select(&reports, Split::Train), &vocab, params.config.max_seq_len);
    let ft = &ctx.config.finetune;
    let (tuned, losses) = fine_tune_multilabel(&params, &train, &ft.optimizer, ft.epochs, ctx.seed())?;
    let state = TrainState {
        adam: Adam::new(&tuned.config),
        params: tuned,
        seed: ctx.seed(),
        vocab_hash: vocab.hash(),
    };
    ctx.write(&args.out, &encode_checkpoint(&state))?;
    let init = if args.scratch { "scratch" } else { "checkpoint" };
    ctx.write_sidecar(
        &args.out,
        json!({"init": init, "vocab_hash": vocab.hash(), "epoch_losses": losses}),
    )?;
    ctx.log_summary(json!({"examples": train.len(), "epochs": losses.len(), "final_loss": losses.last()}));
    Ok(())
}

pub fn predict(ctx: &mut Ctx, args: PredictArgs) -> Result<()> {
    let vocab = ctx.read_vocab(&args.vocab)?;
    let state = read_checkpoint(ctx, &args.checkpoint)?;
    check_vocab_hash(&state.vocab_hash, &vocab.hash())?;
    let reports = ctx.read_reports(&args.reports)?;
    let selected: Vec<&LabeledReport> = match &args.split {
        Some(p) => {
            let assignment: SplitAssignment = ctx.read_json(p)?;
            assignment.select(&reports, args.subset)
        }
        None => reports.iter().collect(),
    };
    let exs = examples(&selected, &vocab, state.params.config.max_seq_len);
    let scored = score(&state.params, &exs)?;
    ctx.write_jsonl(&args.out, &scored)?;
    ctx.write_sidecar(&args.out, json!({"vocab_hash": vocab.hash()}))?;
    ctx.log_summary(json!({"predictions": scored.len()}));
    Ok(())
}
