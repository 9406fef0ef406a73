use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::average_precision;
use super::dtw::{dtw_distance, DtwNorm};
use crate::dataio::AwdPairRow;
use crate::linalg::Mat;
use crate::spanpool::{pool_span, time_to_frames, PoolMode, SpanSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AwdSimilarity {
    /// Cosine similarity of pooled span vectors.
    Pooled(PoolMode),
    /// Negated normalized DTW cost.
    Dtw(DtwNorm),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwdConfig {
    pub frame_duration: f64,
    /// Pairs with either segment outside these bounds (seconds) are skipped.
    pub min_duration: f64,
    pub max_duration: f64,
}

impl Default for AwdConfig {
    fn default() -> Self {
        Self {
            frame_duration: 0.02,
            min_duration: 0.5,
            max_duration: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwdOutcome {
    pub average_precision: f64,
    pub scored: usize,
    pub skipped: usize,
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::Degenerate("zero-norm vector in cosine similarity".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
}

fn span<'a>(
    features: &'a BTreeMap<String, Mat>,
    utt: &str,
    start: f64,
    end: f64,
    fd: f64,
) -> Result<(&'a Mat, usize, usize)> {
    let frames = features
        .get(utt)
        .ok_or_else(|| Error::Data(format!("no features for utterance {utt:?}")))?;
    let (s, e) = time_to_frames(start, end, fd, frames.nrows())?;
    Ok((frames, s, e))
}

/// Similarity of the two segments of one pair.
pub fn pair_similarity(
    pair: &AwdPairRow,
    features: &BTreeMap<String, Mat>,
    sim: AwdSimilarity,
    frame_duration: f64,
) -> Result<f64> {
    let (fa, sa, ea) = span(features, &pair.utt_a, pair.start_a, pair.end_a, frame_duration)?;
    let (fb, sb, eb) = span(features, &pair.utt_b, pair.start_b, pair.end_b, frame_duration)?;
    match sim {
        AwdSimilarity::Pooled(mode) => {
            let va = pool_span(fa, &SpanSpec::new(mode, sa, ea)?)?;
            let vb = pool_span(fb, &SpanSpec::new(mode, sb, eb)?)?;
            cosine(va.as_slice(), vb.as_slice())
        }
        AwdSimilarity::Dtw(norm) => {
            let a = fa.rows(sa, ea - sa).into_owned();
            let b = fb.rows(sb, eb - sb).into_owned();
            Ok(-dtw_distance(&a, &b, norm)?)
        }
    }
}

/// Average precision of same-word detection over a pair list.
pub fn awd_score(
    pairs: &[AwdPairRow],
    features: &BTreeMap<String, Mat>,
    sim: AwdSimilarity,
    cfg: &AwdConfig,
) -> Result<AwdOutcome> {
    let in_bounds = |s: f64, e: f64| {
        let d = e - s;
        d >= cfg.min_duration - 1e-9 && d <= cfg.max_duration + 1e-9
    };
    let kept: Vec<&AwdPairRow> = pairs
        .iter()
        .filter(|p| in_bounds(p.start_a, p.end_a) && in_bounds(p.start_b, p.end_b))
        .collect();
    let skipped = pairs.len() - kept.len();
    if skipped > 0 {
        log::warn!("skipped {skipped} pairs outside the duration bounds");
    }
    let scores = kept
        .par_iter()
        .map(|p| pair_similarity(p, features, sim, cfg.frame_duration))
        .collect::<Result<Vec<f64>>>()?;
    let same: Vec<bool> = kept.iter().map(|p| p.same_word()).collect();
    Ok(AwdOutcome {
        average_precision: average_precision(&scores, &same)?,
        scored: kept.len(),
        skipped,
    })
}

pub fn awd_pool_score(
    pairs: &[AwdPairRow],
    features: &BTreeMap<String, Mat>,
    pool: PoolMode,
    cfg: &AwdConfig,
) -> Result<AwdOutcome> {
    awd_score(pairs, features, AwdSimilarity::Pooled(pool), cfg)
}

pub fn awd_dtw_score(
    pairs: &[AwdPairRow],
    features: &BTreeMap<String, Mat>,
    norm: DtwNorm,
    cfg: &AwdConfig,
) -> Result<AwdOutcome> {
    awd_score(pairs, features, AwdSimilarity::Dtw(norm), cfg)
}
