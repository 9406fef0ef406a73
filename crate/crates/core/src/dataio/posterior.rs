use std::path::Path;

use super::FeatureMatrix;
use crate::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-4;

/// T x V frame posteriors over a CTC token vocabulary.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    probs: FeatureMatrix,
    vocab: Vec<String>,
    frame_duration: f64,
}

impl PosteriorGrid {
    pub fn new(probs: FeatureMatrix, vocab: Vec<String>, frame_duration: f64) -> Result<Self> {
        if probs.cols() != vocab.len() {
            return Err(Error::Shape(format!(
                "{} posterior columns for a vocabulary of {}",
                probs.cols(),
                vocab.len()
            )));
        }
        if !(frame_duration > 0.0) {
            return Err(Error::Parameter(format!(
                "frame duration must be positive, got {frame_duration}"
            )));
        }
        for t in 0..probs.rows() {
            let s: f64 = probs.row(t).iter().map(|&p| p as f64).sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Data(format!("frame {t} sums to {s}, not 1")));
            }
        }
        Ok(Self {
            probs,
            vocab,
            frame_duration,
        })
    }

    pub fn frames(&self) -> usize {
        self.probs.rows()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn frame_duration(&self) -> f64 {
        self.frame_duration
    }

    pub fn probs(&self) -> &FeatureMatrix {
        &self.probs
    }

    /// Per-frame argmax token index; ties go to the lowest index.
    pub fn greedy_path(&self) -> Vec<usize> {
        (0..self.frames())
            .map(|t| {
                let row = self.probs.row(t);
                let mut best = 0;
                for (v, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = v;
                    }
                }
                best
            })
            .collect()
    }
}

/// Vocabulary sidecar: `index<TAB>token`, indices covering 0..V exactly once.
pub fn parse_vocab(text: &str) -> Result<Vec<String>> {
    let mut slots: Vec<Option<String>> = Vec::new();
    for (line, l) in super::data_lines(text) {
        let (idx, tok) = l.split_once('\t').ok_or_else(|| Error::Parse {
            line,
            msg: "expected index<TAB>token".into(),
        })?;
        let idx: usize = idx.trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad index {idx:?}"),
        })?;
        if slots.len() <= idx {
            slots.resize(idx + 1, None);
        }
        if slots[idx].replace(tok.to_string()).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate index {idx}"),
            });
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::Format(format!("vocabulary index {i} missing"))))
        .collect()
}

pub fn read_vocab(path: impl AsRef<Path>) -> Result<Vec<String>> {
    parse_vocab(&super::read_text(path.as_ref())?)
}

pub fn read_posterior_grid(
    probs_path: impl AsRef<Path>,
    vocab_path: impl AsRef<Path>,
    frame_duration: f64,
) -> Result<PosteriorGrid> {
    let probs = super::read_feature_matrix(probs_path)?;
    let vocab = read_vocab(vocab_path)?;
    PosteriorGrid::new(probs, vocab, frame_duration)
}
