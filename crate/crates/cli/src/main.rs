//! `radmix` command-line tool.
//!
//! Every subcommand reads the optional pipeline configuration file, applies
//! its own flags on top, writes its artifacts with a `.meta.json` sidecar and
//! logs a one-line summary to stderr. Exit status is 0 on success, 1 on a
//! pipeline error and 2 on a usage error.

mod commands;
mod context;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radmix::config::PipelineConfig;

use context::{Ctx, Format};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "radmix", version, about = "Clinical corpus preparation and mixed-domain pretraining data")]
struct Cli {
    /// Pipeline configuration (`.toml`, otherwise JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log and result format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize raw documents and drop short ones.
    Clean(commands::corpus::CleanArgs),
    /// Replace identifying spans with placeholders.
    Deident(commands::corpus::DeidentArgs),
    /// Remove exact duplicates (case and whitespace insensitive).
    Dedup(commands::corpus::DedupArgs),
    /// Per-source corpus statistics and the corpus manifest.
    Stats(commands::corpus::StatsArgs),
    /// Train a WordPiece vocabulary.
    VocabTrain(commands::tokens::VocabTrainArgs),
    /// Subword fertility and unknown-token rate of a vocabulary on a corpus.
    Fertility(commands::tokens::FertilityArgs),
    /// Chunk and interleave a domain corpus with a general corpus.
    Mix(commands::tokens::MixArgs),
    /// Create masked-LM / next-sentence pretraining records.
    Instances(commands::tokens::InstancesArgs),
    /// Stratified train/validation/test split of labeled reports.
    Split(commands::eval::SplitArgs),
    /// Score predictions against gold labels.
    Eval(commands::eval::EvalArgs),
    /// Model comparison tables from metrics files.
    Report(commands::eval::ReportArgs),
    /// Paired significance test between two sets of runs.
    Sigtest(commands::eval::SigtestArgs),
    /// Pretrain the tiny encoder on a record file.
    PretrainTiny(commands::model::PretrainArgs),
    /// Fine-tune the tiny encoder on the multi-label report task.
    FinetuneTiny(commands::model::FinetuneArgs),
    /// Per-label scores of a fine-tuned checkpoint.
    Predict(commands::model::PredictArgs),
    /// Write synthetic corpora and labeled reports.
    Synth(commands::synth::SynthArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Clean(_) => "clean",
            Command::Deident(_) => "deident",
            Command::Dedup(_) => "dedup",
            Command::Stats(_) => "stats",
            Command::VocabTrain(_) => "vocab-train",
            Command::Fertility(_) => "fertility",
            Command::Mix(_) => "mix",
            Command::Instances(_) => "instances",
            Command::Split(_) => "split",
            Command::Eval(_) => "eval",
            Command::Report(_) => "report",
            Command::Sigtest(_) => "sigtest",
            Command::PretrainTiny(_) => "pretrain-tiny",
            Command::FinetuneTiny(_) => "finetune-tiny",
            Command::Predict(_) => "predict",
            Command::Synth(_) => "synth",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("cannot start thread pool: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut ctx = Ctx::new(cli.command.name(), config, cli.format);
    match cli.command {
        Command::Clean(a) => commands::corpus::clean(&mut ctx, a),
        Command::Deident(a) => commands::corpus::deident(&mut ctx, a),
        Command::Dedup(a) => commands::corpus::dedup(&mut ctx, a),
        Command::Stats(a) => commands::corpus::stats(&mut ctx, a),
        Command::VocabTrain(a) => commands::tokens::vocab_train(&mut ctx, a),
        Command::Fertility(a) => commands::tokens::fertility(&mut ctx, a),
        Command::Mix(a) => commands::tokens::mix(&mut ctx, a),
        Command::Instances(a) => commands::tokens::instances(&mut ctx, a),
        Command::Split(a) => commands::eval::split(&mut ctx, a),
        Command::Eval(a) => commands::eval::eval(&mut ctx, a),
        Command::Report(a) => commands::eval::report(&mut ctx, a),
        Command::Sigtest(a) => commands::eval::sigtest(&mut ctx, a),
        Command::PretrainTiny(a) => commands::model::pretrain(&mut ctx, a),
        Command::FinetuneTiny(a) => commands::model::finetune(&mut ctx, a),
        Command::Predict(a) => commands::model::predict(&mut ctx, a),
        Command::Synth(a) => commands::synth::synth(&mut ctx, a),
    }
}

fn main() -> ExitCode {
    // Usage errors exit with status 2 from inside `parse`.
    let cli = Cli::parse();
    let format = cli.format;
    let command = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match format {
                Format::Json => eprintln!(
                    "{}",
                    serde_json::json!({"command": command, "error": e.kind(), "message": e.to_string()})
                ),
                Format::Text => eprintln!("radmix {command}: error: {e}"),
            }
            ExitCode::from(1)
        }
    }
}
