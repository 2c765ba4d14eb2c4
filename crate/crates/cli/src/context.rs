//! Per-invocation state: the effective configuration, input bookkeeping,
//! artifact sidecars and log output.

use std::fs;
use std::path::{Path, PathBuf};

use radmix::config::PipelineConfig;
use radmix::corpus::{decode_utf8, parse_jsonl, parse_txt, CleanDocument, RawDocument, Source};
use radmix::datasets::{parse_reports, LabeledReport};
use radmix::sha256_hex;
use radmix::vocab::{VocabSidecar, Vocabulary};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Metadata written as `<artifact>.meta.json` next to every artifact.
#[derive(Debug, Serialize)]
struct Sidecar<'a, T: Serialize> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    inputs: &'a [InputHash],
    details: T,
}

pub struct Ctx {
    pub command: &'static str,
    pub config: PipelineConfig,
    pub format: Format,
    inputs: Vec<InputHash>,
}

pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Manifest timestamp. `SOURCE_DATE_EPOCH` pins it for reproducible output.
pub fn created_timestamp() -> String {
    use time::format_description::well_known::Rfc3339;
    use time::OffsetDateTime;

    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| OffsetDateTime::from_unix_timestamp(secs).ok())
        .unwrap_or_else(OffsetDateTime::now_utc)
        .replace_nanosecond(0)
        .expect("zero nanoseconds is valid");
    now.format(&Rfc3339).expect("RFC 3339 formatting of a valid date")
}

impl Ctx {
    pub fn new(command: &'static str, config: PipelineConfig, format: Format) -> Self {
        Ctx {
            command,
            config,
            format,
            inputs: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn config_hash(&self) -> String {
        self.config.hash()
    }

    /// Reads a file and records its hash as an input of this command.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read(path)?;
        Ok(decode_utf8(&path.display().to_string(), bytes)?)
    }

    pub fn read_json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let text = self.read_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn read_jsonl<T: DeserializeOwned>(&mut self, path: &Path) -> Result<Vec<T>> {
        let text = self.read_string(path)?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| CliError::Parse {
                    path: path.to_path_buf(),
                    message: format!("line {}: {e}", i + 1),
                })
            })
            .collect()
    }

    /// Reads a `.txt` corpus (which needs `source`) or a `.jsonl` corpus.
    pub fn read_raw_docs(&mut self, path: &Path, source: Option<Source>) -> Result<Vec<RawDocument>> {
        let text = self.read_string(path)?;
        if path.extension().is_some_and(|e| e == "txt") {
            let source = source.ok_or_else(|| {
                CliError::Invalid(format!("{}: `.txt` input needs --source", path.display()))
            })?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            Ok(parse_txt(&stem, &text, source))
        } else {
            Ok(parse_jsonl(&path.display().to_string(), &text)?)
        }
    }

    pub fn read_clean_docs(&mut self, paths: &[PathBuf]) -> Result<Vec<CleanDocument>> {
        let mut docs = Vec::new();
        for p in paths {
            docs.extend(self.read_jsonl::<CleanDocument>(p)?);
        }
        Ok(docs)
    }

    /// Loads `vocab.txt`. Casing comes from its sidecar when one exists.
    pub fn read_vocab(&mut self, path: &Path) -> Result<Vocabulary> {
        let text = self.read_string(path)?;
        let cased = fs::read_to_string(sidecar_path(path))
            .ok()
            .and_then(|s| serde_json::from_str::<Value>(&s).ok())
            .and_then(|v| serde_json::from_value::<VocabSidecar>(v["details"].clone()).ok())
            .map_or(self.config.vocab.cased, |s| s.config.cased);
        Vocabulary::from_vocab_txt(&text, cased).map_err(|source| CliError::Vocab {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_reports(&mut self, path: &Path) -> Result<Vec<LabeledReport>> {
        let text = self.read_string(path)?;
        Ok(parse_reports(&path.display().to_string(), &text)?)
    }

    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(path, bytes).map_err(io_err(path))
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable artifact");
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    pub fn write_jsonl<T: Serialize>(&self, path: &Path, items: &[T]) -> Result<()> {
        let mut out = String::new();
        for item in items {
            out.push_str(&serde_json::to_string(item).expect("serializable record"));
            out.push('\n');
        }
        self.write(path, out.as_bytes())
    }

    pub fn write_sidecar<T: Serialize>(&self, artifact: &Path, details: T) -> Result<()> {
        let sidecar = Sidecar {
            command: self.command,
            config_hash: self.config_hash(),
            seed: self.seed(),
            inputs: &self.inputs,
            details,
        };
        self.write_json(&sidecar_path(artifact), &sidecar)
    }

    /// Logs the run summary to stderr.
    pub fn log_summary(&self, counts: Value) {
        match self.format {
            Format::Json => {
                let line = json!({
                    "command": self.command,
                    "config_hash": self.config_hash(),
                    "seed": self.seed(),
                    "inputs": self.inputs,
                    "counts": counts,
                });
                eprintln!("{line}");
            }
            Format::Text => {
                let mut line = format!(
                    "radmix {}: seed={} config_hash={}",
                    self.command,
                    self.seed(),
                    &self.config_hash()[..12]
                );
                for input in &self.inputs {
                    line.push_str(&format!(" input={}@{}", input.path, &input.sha256[..12]));
                }
                if let Value::Object(map) = &counts {
                    for (k, v) in map {
                        line.push_str(&format!(" {k}={v}"));
                    }
                }
                eprintln!("{line}");
            }
        }
    }

    pub fn warn(&self, message: &str) {
        match self.format {
            Format::Json => eprintln!("{}", json!({"command": self.command, "warning": message})),
            Format::Text => eprintln!("warning: {message}"),
        }
    }

    /// Prints a command result to stdout.
    pub fn emit(&self, text: &str, value: &Value) {
        match self.format {
            Format::Json => println!("{value}"),
            Format::Text => print!("{text}"),
        }
    }
}
