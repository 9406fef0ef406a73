use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use rprobe::report::ScoreRecord;

use crate::args::Cli;

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Contents of `scores.json`, if the command scores anything.
    pub scores: Option<serde_json::Value>,
    /// Extra files written next to `scores.json`.
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
    pub failed: bool,
    /// Conventions recorded in `run.json`.
    pub notes: Option<serde_json::Value>,
}

impl Outcome {
    pub fn new(summary: impl Into<String>) -> Self {
        Self {
            summary: summary.into(),
            ..Self::default()
        }
    }

    pub fn with_scores<T: Serialize>(mut self, scores: &T) -> Self {
        self.scores = Some(serde_json::to_value(scores).expect("scores serialize"));
        self
    }

    pub fn with_file(mut self, name: impl Into<String>, data: impl Into<Vec<u8>>) -> Self {
        self.files.push((name.into(), data.into()));
        self
    }
}

/// `metric: score` for one record, or the best layer of several.
pub fn summarize(metric: &str, records: &[ScoreRecord]) -> String {
    match records {
        [r] => format!("{metric}: {:.6} (spread {:.6})", r.score, r.spread),
        _ => {
            let best = records
                .iter()
                .filter(|r| r.score.is_finite())
                .max_by(|a, b| a.score.total_cmp(&b.score));
            match best {
                Some(b) => format!(
                    "{metric}: {} layers, best layer {} at {:.6}",
                    records.len(),
                    b.layer.map_or_else(|| "-".to_string(), |l| l.to_string()),
                    b.score
                ),
                None => format!("{metric}: {} layers", records.len()),
            }
        }
    }
}

fn write(dir: &Path, name: &str, data: &[u8]) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))
}

/// Writes `scores.json`, extra files and `run.json` into `dir`.
pub fn emit(dir: &Path, cli: &Cli, threads: usize, outcome: &Outcome) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    if let Some(scores) = &outcome.scores {
        let mut text = serde_json::to_string_pretty(scores)?;
        text.push('\n');
        write(dir, "scores.json", text.as_bytes())?;
    }
    for (name, data) in &outcome.files {
        write(dir, name, data)?;
    }
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let run = serde_json::json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cli.global.seed,
        "sample_sets": cli.global.sample_sets,
        "threads": threads,
        "config": cli.command.config(),
        "notes": outcome.notes,
        "timestamp": timestamp,
    });
    let mut text = serde_json::to_string_pretty(&run)?;
    text.push('\n');
    write(dir, "run.json", text.as_bytes())
}
