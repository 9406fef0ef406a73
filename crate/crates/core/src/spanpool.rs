//! Frame-to-span pooling rules and time-to-frame conversion.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Single-frame sampling locations, as fractions of the span.
pub const FRAME_LOCATIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PoolMode {
    /// Mean of every frame in the span.
    Mean,
    /// Mean of the middle third; the outer thirds are dropped.
    CentralThird,
    /// Mean of quarter 1..=4.
    Quarter(u8),
    /// One frame at a fractional location in `FRAME_LOCATIONS`.
    Frame(f64),
}

impl PoolMode {
    pub fn validate(self) -> Result<Self> {
        match self {
            PoolMode::Quarter(q) if !(1..=4).contains(&q) => {
                Err(Error::Parameter(format!("quarter index {q} not in 1..=4")))
            }
            PoolMode::Frame(loc) if !FRAME_LOCATIONS.contains(&loc) => Err(Error::Parameter(
                format!("frame location {loc} not in {FRAME_LOCATIONS:?}"),
            )),
            m => Ok(m),
        }
    }
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolMode::Mean => write!(f, "mean"),
            PoolMode::CentralThird => write!(f, "central-third"),
            PoolMode::Quarter(q) => write!(f, "quarter-{q}"),
            PoolMode::Frame(l) => write!(f, "frame-{l}"),
        }
    }
}

impl FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mode = match s {
            "mean" => PoolMode::Mean,
            "central-third" => PoolMode::CentralThird,
            _ => {
                if let Some(q) = s.strip_prefix("quarter-") {
                    PoolMode::Quarter(
                        q.parse()
                            .map_err(|_| Error::Parameter(format!("bad quarter in {s:?}")))?,
                    )
                } else if let Some(l) = s.strip_prefix("frame-") {
                    PoolMode::Frame(
                        l.parse()
                            .map_err(|_| Error::Parameter(format!("bad location in {s:?}")))?,
                    )
                } else {
                    return Err(Error::Parameter(format!("unknown pooling mode {s:?}")));
                }
            }
        };
        mode.validate()
    }
}

impl From<PoolMode> for String {
    fn from(m: PoolMode) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for PoolMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A pooling rule applied to the frames `start..end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpanSpec {
    pub mode: PoolMode,
    pub start: usize,
    pub end: usize,
}

impl SpanSpec {
    pub fn new(mode: PoolMode, start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::Shape(format!("empty span {start}..{end}")));
        }
        Ok(Self {
            mode: mode.validate()?,
            start,
            end,
        })
    }
}

/// Row range `lo..hi` (relative to the span) averaged by `mode` for a span of `len` frames.
pub fn pooled_rows(mode: PoolMode, len: usize) -> Result<(usize, usize)> {
    if len == 0 {
        return Err(Error::Shape("empty span".into()));
    }
    let range = match mode.validate()? {
        PoolMode::Mean => (0, len),
        PoolMode::CentralThird => {
            if len < 3 {
                let mid = (len - 1) / 2;
                (mid, mid + 1)
            } else {
                let third = len / 3;
                (third, len - third)
            }
        }
        PoolMode::Quarter(q) => {
            let q = q as usize;
            let size = len / 4;
            if size == 0 {
                // Fewer than four frames: take the frame where the quarter begins.
                let at = (q - 1) * len / 4;
                (at, at + 1)
            } else {
                let lo = (q - 1) * size;
                let hi = if q == 4 { len } else { q * size };
                (lo, hi)
            }
        }
        PoolMode::Frame(loc) => {
            let at = (loc * (len - 1) as f64).round() as usize;
            (at, at + 1)
        }
    };
    Ok(range)
}

/// Pools the span rows of `frames` (rows = frames) into one vector.
pub fn pool_span(frames: &DMatrix<f64>, spec: &SpanSpec) -> Result<DVector<f64>> {
    if spec.start >= spec.end {
        return Err(Error::Shape(format!("empty span {}..{}", spec.start, spec.end)));
    }
    if spec.end > frames.nrows() {
        return Err(Error::Shape(format!(
            "span {}..{} exceeds {} frames",
            spec.start,
            spec.end,
            frames.nrows()
        )));
    }
    let (lo, hi) = pooled_rows(spec.mode, spec.end - spec.start)?;
    Ok(mean_rows(frames, spec.start + lo, spec.start + hi))
}

pub(crate) fn mean_rows(m: &DMatrix<f64>, lo: usize, hi: usize) -> DVector<f64> {
    // Accumulate offsets from the first row so constant spans pool exactly.
    let base: DVector<f64> = m.row(lo).transpose();
    let mut acc = DVector::zeros(m.ncols());
    for r in lo + 1..hi {
        for c in 0..m.ncols() {
            acc[c] += m[(r, c)] - base[c];
        }
    }
    base + acc / (hi - lo) as f64
}

/// Snap ratios within this distance of an integer before floor/ceil.
const SNAP: f64 = 1e-9;

fn snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

/// Converts a time span to the frame range `[start_frame, end_frame)`.
pub fn time_to_frames(
    start: f64,
    end: f64,
    frame_duration: f64,
    total_frames: usize,
) -> Result<(usize, usize)> {
    if !(start >= 0.0 && start < end) {
        return Err(Error::Range(format!("need 0 <= start < end, got {start}..{end}")));
    }
    if !(frame_duration > 0.0) {
        return Err(Error::Parameter(format!(
            "frame duration must be positive, got {frame_duration}"
        )));
    }
    let s = snapped(start / frame_duration).floor() as usize;
    if s >= total_frames {
        return Err(Error::Range(format!(
            "span {start}..{end} starts at frame {s}, beyond {total_frames} frames"
        )));
    }
    let mut e = (snapped(end / frame_duration).ceil() as usize).min(total_frames);
    if e <= s {
        e = s + 1;
    }
    Ok((s, e))
}
