//! Per-layer score records shared by every analysis.

use serde::{Deserialize, Serialize};

/// One line of `scores.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    /// `None` when the run compared two standalone files.
    pub layer: Option<usize>,
    pub metric: String,
    pub score: f64,
    /// Max minus min across sample sets.
    pub spread: f64,
    pub config: serde_json::Value,
}

impl ScoreRecord {
    pub fn new(layer: Option<usize>, metric: impl Into<String>, score: f64, spread: f64) -> Self {
        Self {
            layer,
            metric: metric.into(),
            score,
            spread,
            config: serde_json::Value::Null,
        }
    }

    pub fn with_config(mut self, config: serde_json::Value) -> Self {
        self.config = config;
        self
    }
}

/// Mean and max-minus-min of per-sample-set scores.
pub fn mean_and_spread(scores: &[f64]) -> (f64, f64) {
    if scores.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, max - min)
}
