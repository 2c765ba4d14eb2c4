//! Helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const CONFIG: &str = r#"
seed = 11

[cleaning]
min_chars = 60

[vocab]
vocab_size = 600

[mixing]
chunk_tokens = 61

[instances]
max_seq_len = 64
dupe_factor = 2

[model]
hidden = 16
heads = 2
ffn = 32
max_seq_len = 64

[pretrain]
steps = 4

[pretrain.optimizer]
learning_rate = 0.001
batch_size = 4

[finetune]
epochs = 1

[finetune.optimizer]
learning_rate = 0.001
batch_size = 8
"#;

pub fn radmix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radmix"))
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .args(args)
        .output()
        .expect("binary runs")
}

#[track_caller]
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = radmix(dir, args);
    assert!(
        out.status.success(),
        "radmix {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.toml"), CONFIG).unwrap();
    ok(
        dir.path(),
        &["--config", "config.toml", "synth", "--out-dir", "raw", "--general", "120", "--domain", "120", "--reports", "120"],
    );
    dir
}

/// Runs the whole pipeline in `dir` with extra global flags.
pub fn recipe(dir: &Path, extra: &[&str]) {
    let run = |args: &[&str]| {
        let mut full = vec!["--config", "config.toml"];
        full.extend_from_slice(extra);
        full.extend_from_slice(args);
        ok(dir, &full)
    };
    run(&["clean", "--input", "raw/general.jsonl", "--out", "work/general.clean.jsonl"]);
    run(&["clean", "--input", "raw/domain.jsonl", "--out", "work/domain.clean.jsonl"]);
    run(&["deident", "--input", "work/domain.clean.jsonl", "--out", "work/domain.deid.jsonl"]);
    run(&["dedup", "--input", "work/domain.deid.jsonl", "--out", "work/domain.jsonl"]);
    run(&["dedup", "--input", "work/general.clean.jsonl", "--out", "work/general.jsonl"]);
    run(&["stats", "--input", "work/general.jsonl", "--input", "work/domain.jsonl", "--out", "work/manifest.json"]);
    run(&["vocab-train", "--input", "work/general.jsonl", "--input", "work/domain.jsonl", "--out", "work/vocab.txt"]);
    run(&["fertility", "--vocab", "work/vocab.txt", "--input", "work/domain.jsonl", "--out", "work/fertility.json"]);
    run(&["mix", "--vocab", "work/vocab.txt", "--general", "work/general.jsonl", "--domain", "work/domain.jsonl", "--out-dir", "work/mix"]);
    run(&[
        "instances", "--mode", "simultaneous", "--vocab", "work/vocab.txt", "--general", "work/general.jsonl",
        "--domain", "work/domain.jsonl", "--out", "work/train.rec", "--debug-json", "work/train.debug.jsonl",
    ]);
    run(&["pretrain-tiny", "--records", "work/train.rec", "--vocab", "work/vocab.txt", "--out", "work/pre.ckpt"]);
    run(&["split", "--reports", "raw/reports.jsonl", "--out", "work/split.json"]);
    run(&[
        "finetune-tiny", "--checkpoint", "work/pre.ckpt", "--vocab", "work/vocab.txt", "--reports", "raw/reports.jsonl",
        "--split", "work/split.json", "--out", "work/ft.ckpt",
    ]);
    run(&[
        "predict", "--checkpoint", "work/ft.ckpt", "--vocab", "work/vocab.txt", "--reports", "raw/reports.jsonl",
        "--split", "work/split.json", "--out", "work/preds.jsonl",
    ]);
    run(&[
        "eval", "--reports", "raw/reports.jsonl", "--split", "work/split.json", "--predictions", "work/preds.jsonl",
        "--model", "tiny", "--out", "work/metrics.json",
    ]);
}

pub fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(&dir.join("work"))
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap().display().to_string();
            (rel, fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

pub fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
