use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub utt_id: String,
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Time-aligned spans in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentTable {
    entries: Vec<Segment>,
}

impl SegmentTable {
    /// Parses `utt_id<TAB>label<TAB>start<TAB>end` lines. With `check_overlap`,
    /// spans inside one utterance must not intersect (touching is allowed).
    pub fn parse(text: &str, check_overlap: bool) -> Result<Self> {
        let mut entries = Vec::new();
        let mut line_of = Vec::new();
        for (line, l) in super::data_lines(text) {
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 4 tab-separated fields, got {}", fields.len()),
                });
            }
            let start = super::parse_f64(fields[2], line, "start time")?;
            let end = super::parse_f64(fields[3], line, "end time")?;
            if !(start >= 0.0 && start < end && end.is_finite()) {
                return Err(Error::Range(format!(
                    "line {line}: need 0 <= start < end, got {start}..{end}"
                )));
            }
            entries.push(Segment {
                utt_id: fields[0].to_string(),
                label: fields[1].to_string(),
                start,
                end,
            });
            line_of.push(line);
        }
        if check_overlap {
            check_no_overlap(&entries, &line_of)?;
        }
        Ok(Self { entries })
    }

    pub fn from_entries(entries: Vec<Segment>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[Segment] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries grouped by utterance, each group in file order.
    pub fn by_utterance(&self) -> BTreeMap<&str, Vec<&Segment>> {
        let mut map: BTreeMap<&str, Vec<&Segment>> = BTreeMap::new();
        for s in &self.entries {
            map.entry(s.utt_id.as_str()).or_default().push(s);
        }
        map
    }
}

fn check_no_overlap(entries: &[Segment], line_of: &[usize]) -> Result<()> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in entries.iter().enumerate() {
        groups.entry(&s.utt_id).or_default().push(i);
    }
    for idx in groups.values_mut() {
        idx.sort_by(|&a, &b| entries[a].start.total_cmp(&entries[b].start));
        // Sorted by start: an overlap with any earlier span implies one with
        // the span whose end reaches furthest.
        let mut furthest = idx[0];
        for &i in &idx[1..] {
            if entries[i].start < entries[furthest].end {
                let (a, b) = if line_of[furthest] < line_of[i] {
                    (furthest, i)
                } else {
                    (i, furthest)
                };
                return Err(Error::Overlap(format!(
                    "utterance {}: line {} ({}..{}) overlaps line {} ({}..{})",
                    entries[i].utt_id,
                    line_of[a],
                    entries[a].start,
                    entries[a].end,
                    line_of[b],
                    entries[b].start,
                    entries[b].end
                )));
            }
            if entries[i].end > entries[furthest].end {
                furthest = i;
            }
        }
    }
    Ok(())
}

pub fn read_segments(path: impl AsRef<Path>) -> Result<SegmentTable> {
    SegmentTable::parse(&super::read_text(path.as_ref())?, true)
}
