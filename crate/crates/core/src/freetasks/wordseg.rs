use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::Segment;
use crate::linalg::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameDistance {
    Cosine,
    Euclidean,
}

impl fmt::Display for FrameDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameDistance::Cosine => "cosine",
            FrameDistance::Euclidean => "euclidean",
        })
    }
}

impl FromStr for FrameDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(FrameDistance::Cosine),
            "euclidean" => Ok(FrameDistance::Euclidean),
            _ => Err(Error::Parameter(format!("unknown frame distance {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConfig {
    pub distance: FrameDistance,
    /// Odd moving-average width in frames.
    pub smooth_window: usize,
    pub prominence: f64,
    pub frame_duration: f64,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            distance: FrameDistance::Cosine,
            smooth_window: 3,
            prominence: 0.1,
            frame_duration: 0.02,
        }
    }
}

/// `g[t] = d(f[t+1], f[t])` over unit-normalized frames.
pub fn dissimilarity_curve(frames: &Mat, distance: FrameDistance) -> Result<Vec<f64>> {
    let unit = super::dtw::unit_rows(frames, "utterance")?;
    Ok((0..unit.nrows().saturating_sub(1))
        .map(|t| {
            let (a, b) = (unit.row(t + 1), unit.row(t));
            match distance {
                FrameDistance::Cosine => super::dtw::unit_cosine_distance(a, b),
                FrameDistance::Euclidean => (a - b).norm(),
            }
        })
        .collect())
}

/// Centered moving average; the window is truncated at the edges.
pub fn moving_average(g: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Parameter(format!("smoothing window must be odd, got {window}")));
    }
    if window >= g.len() && window > 1 {
        return Err(Error::Parameter(format!(
            "smoothing window {window} does not fit a curve of {} points",
            g.len()
        )));
    }
    let h = window / 2;
    Ok((0..g.len())
        .map(|t| {
            let lo = t.saturating_sub(h);
            let hi = (t + h + 1).min(g.len());
            g[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}

/// Strict local maxima; a flat-topped peak is reported at its middle sample
/// (left of centre for even widths). Endpoints are never peaks.
pub fn find_peaks(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    if x.len() < 3 {
        return peaks;
    }
    let last = x.len() - 1;
    let mut i = 1;
    while i < last {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < last && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

/// Height of each peak above the higher of the two minima reached before
/// the curve climbs above the peak on either side.
pub fn peak_prominences(x: &[f64], peaks: &[usize]) -> Vec<f64> {
    peaks
        .iter()
        .map(|&p| {
            let h = x[p];
            let mut left_min = h;
            for i in (0..p).rev() {
                if x[i] > h {
                    break;
                }
                left_min = left_min.min(x[i]);
            }
            let mut right_min = h;
            for &v in &x[p + 1..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            h - left_min.max(right_min)
        })
        .collect()
}

/// Boundary times in seconds for one utterance.
pub fn detect_word_boundaries(frames: &Mat, cfg: &BoundaryConfig) -> Result<Vec<f64>> {
    if frames.nrows() < 3 {
        return Err(Error::Shape(format!(
            "boundary detection needs at least 3 frames, got {}",
            frames.nrows()
        )));
    }
    if !(cfg.frame_duration > 0.0) {
        return Err(Error::Parameter("frame duration must be positive".into()));
    }
    let g = dissimilarity_curve(frames, cfg.distance)?;
    let s = moving_average(&g, cfg.smooth_window)?;
    let peaks = find_peaks(&s);
    let prom = peak_prominences(&s, &peaks);
    Ok(peaks
        .iter()
        .zip(prom)
        .filter(|(_, p)| *p >= cfg.prominence)
        .map(|(&t, _)| (t + 1) as f64 * cfg.frame_duration)
        .collect())
}

/// Word start and end times strictly inside the utterance, deduplicated.
/// The utterance edges are excluded because a detector working on
/// adjacent-frame changes cannot place a boundary there.
pub fn reference_boundaries(words: &[&Segment], duration: f64) -> Vec<f64> {
    const EDGE: f64 = 1e-9;
    let mut times: Vec<f64> = words
        .iter()
        .flat_map(|w| [w.start, w.end])
        .filter(|&t| t > EDGE && t < duration - EDGE)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= EDGE);
    times
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Matching {
    /// Closest pairs first.
    #[default]
    Greedy,
    /// Maximum number of one-to-one matches.
    Optimal,
}

/// Slack on the tolerance comparison so decimal tolerances behave as written.
const TOL_SLACK: f64 = 1e-9;

/// Number of one-to-one hypothesis/reference matches within `tolerance`.
pub fn count_matches(hyp: &[f64], reference: &[f64], tolerance: f64, matching: Matching) -> usize {
    let tol = tolerance + TOL_SLACK;
    match matching {
        Matching::Greedy => {
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            for (i, r) in reference.iter().enumerate() {
                for (j, h) in hyp.iter().enumerate() {
                    let d = (h - r).abs();
                    if d <= tol {
                        cands.push((d, i, j));
                    }
                }
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut used_r = vec![false; reference.len()];
            let mut used_h = vec![false; hyp.len()];
            let mut n = 0;
            for (_, i, j) in cands {
                if !used_r[i] && !used_h[j] {
                    used_r[i] = true;
                    used_h[j] = true;
                    n += 1;
                }
            }
            n
        }
        Matching::Optimal => {
            let mut r = reference.to_vec();
            let mut h = hyp.to_vec();
            r.sort_by(f64::total_cmp);
            h.sort_by(f64::total_cmp);
            let (mut i, mut j, mut n) = (0, 0, 0);
            while i < r.len() && j < h.len() {
                if (h[j] - r[i]).abs() <= tol {
                    n += 1;
                    i += 1;
                    j += 1;
                } else if h[j] < r[i] {
                    j += 1;
                } else {
                    i += 1;
                }
            }
            n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SegCounts {
    pub matches: usize,
    pub hyp: usize,
    pub reference: usize,
}

impl SegCounts {
    pub fn add(&mut self, other: SegCounts) {
        self.matches += other.matches;
        self.hyp += other.hyp;
        self.reference += other.reference;
    }

    pub fn scores(&self) -> SegScores {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.matches, self.hyp);
        let recall = ratio(self.matches, self.reference);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let r_value = if self.reference == 0 {
            0.0
        } else {
            let os = self.hyp as f64 / self.reference as f64 - 1.0;
            let r1 = ((1.0 - recall).powi(2) + os * os).sqrt();
            let r2 = (-os + recall - 1.0) / std::f64::consts::SQRT_2;
            1.0 - (r1.abs() + r2.abs()) / 2.0
        };
        SegScores {
            precision,
            recall,
            f1,
            r_value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub r_value: f64,
}

pub fn segmentation_counts(
    hyp: &[f64],
    reference: &[f64],
    tolerance: f64,
    matching: Matching,
) -> Result<SegCounts> {
    if !(tolerance > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tolerance}")));
    }
    Ok(SegCounts {
        matches: count_matches(hyp, reference, tolerance, matching),
        hyp: hyp.len(),
        reference: reference.len(),
    })
}

pub fn segmentation_metrics(hyp: &[f64], reference: &[f64], tolerance: f64) -> Result<SegScores> {
    Ok(segmentation_counts(hyp, reference, tolerance, Matching::Greedy)?.scores())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegGrid {
    pub distances: Vec<FrameDistance>,
    pub prominences: Vec<f64>,
    pub windows: Vec<usize>,
}

impl Default for SegGrid {
    fn default() -> Self {
        Self {
            distances: vec![FrameDistance::Cosine, FrameDistance::Euclidean],
            prominences: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
            windows: vec![1, 3, 5],
        }
    }
}

/// One utterance: frames plus its reference boundaries.
pub struct SegUtterance<'a> {
    pub frames: &'a Mat,
    pub reference: &'a [f64],
}

/// Pooled scores over utterances for one detector configuration.
pub fn evaluate_segmentation(
    utts: &[SegUtterance<'_>],
    cfg: &BoundaryConfig,
    tolerance: f64,
    matching: Matching,
) -> Result<SegScores> {
    let mut total = SegCounts::default();
    for u in utts {
        let hyp = detect_word_boundaries(u.frames, cfg)?;
        total.add(segmentation_counts(&hyp, u.reference, tolerance, matching)?);
    }
    Ok(total.scores())
}

/// Picks the grid point with the highest pooled F1 (first in grid order on ties).
pub fn grid_search(
    utts: &[SegUtterance<'_>],
    grid: &SegGrid,
    frame_duration: f64,
    tolerance: f64,
    matching: Matching,
) -> Result<(BoundaryConfig, SegScores)> {
    let mut best: Option<(BoundaryConfig, SegScores)> = None;
    for &distance in &grid.distances {
        for &smooth_window in &grid.windows {
            for &prominence in &grid.prominences {
                let cfg = BoundaryConfig {
                    distance,
                    smooth_window,
                    prominence,
                    frame_duration,
                };
                let s = evaluate_segmentation(utts, &cfg, tolerance, matching)?;
                if best.as_ref().is_none_or(|(_, b)| s.f1 > b.f1) {
                    best = Some((cfg, s));
                }
            }
        }
    }
    best.ok_or_else(|| Error::Parameter("empty segmentation grid".into()))
}
