use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ner::{EntityTuple, F1Counts};
use super::nel::EntitySpan;
use crate::{Error, Result};

/// One utterance of a hypothesis or reference entity file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub utt_id: String,
    #[serde(default)]
    pub tuples: Vec<EntityTuple>,
    #[serde(default)]
    pub spans: Vec<EntitySpan>,
}

/// Parses either a JSON array of records or one record per line.
pub fn parse_entity_records(text: &str) -> Result<Vec<EntityRecord>> {
    let recs: Vec<EntityRecord> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?
    } else {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        out
    };
    recs.into_iter()
        .map(|mut r| {
            r.tuples = r.tuples.iter().map(|t| EntityTuple::new(&t.phrase, &t.tag)).collect();
            for s in &r.spans {
                if !(s.start < s.end) {
                    return Err(Error::Range(format!(
                        "{}: span {}..{} is empty",
                        r.utt_id, s.start, s.end
                    )));
                }
            }
            Ok(r)
        })
        .collect()
}

pub fn read_entity_records(path: impl AsRef<Path>) -> Result<Vec<EntityRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_entity_records(&text)
}

/// Pairs hypothesis and reference records by utterance id, in reference
/// order. Utterances present only in the hypothesis are appended with an
/// empty reference.
pub fn align_records<'a>(
    hyp: &'a [EntityRecord],
    reference: &'a [EntityRecord],
) -> Vec<(Option<&'a EntityRecord>, Option<&'a EntityRecord>)> {
    let by_id: std::collections::HashMap<&str, &EntityRecord> =
        hyp.iter().map(|r| (r.utt_id.as_str(), r)).collect();
    let ref_ids: std::collections::HashSet<&str> =
        reference.iter().map(|r| r.utt_id.as_str()).collect();
    let mut out: Vec<_> = reference
        .iter()
        .map(|r| (by_id.get(r.utt_id.as_str()).copied(), Some(r)))
        .collect();
    out.extend(
        hyp.iter()
            .filter(|h| !ref_ids.contains(h.utt_id.as_str()))
            .map(|h| (Some(h), None)),
    );
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: String,
    pub value: f64,
    pub counts: F1Counts,
}
