use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ner::{harmonic, ratio, F1Counts, PrfScores};
use crate::dataio::PosteriorGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub tag: String,
    pub start: f64,
    pub end: f64,
}

impl EntitySpan {
    pub fn new(tag: impl Into<String>, start: f64, end: f64) -> Result<Self> {
        if !(start < end) {
            return Err(Error::Range(format!("entity span needs start < end, got {start}..{end}")));
        }
        Ok(Self {
            tag: tag.into(),
            start,
            end,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelConfig {
    /// Seconds added to both ends of every predicted span.
    pub offset: f64,
    /// Extend a span's end through blank frames that follow the end marker.
    pub incl_blank: bool,
    /// Required overlap fraction for word-F1.
    pub rho: f64,
}

impl Default for NelConfig {
    fn default() -> Self {
        Self {
            offset: 0.0,
            incl_blank: false,
            rho: 1.0,
        }
    }
}

impl NelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.offset.abs() <= 1.0) {
            return Err(Error::Parameter(format!("offset {} outside [-1, 1] s", self.offset)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Parameter(format!("rho {} outside (0, 1]", self.rho)));
        }
        Ok(())
    }
}

/// Vocabulary roles used when reading entity spans off a CTC path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtcMarkers {
    pub blank: String,
    pub end_marker: String,
    /// Start-marker token to entity tag.
    pub start_markers: BTreeMap<String, String>,
}

impl CtcMarkers {
    pub fn new(blank: &str, end_marker: &str, starts: &[(&str, &str)]) -> Self {
        Self {
            blank: blank.into(),
            end_marker: end_marker.into(),
            start_markers: starts.iter().map(|(t, g)| (t.to_string(), g.to_string())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CtcSpans {
    pub spans: Vec<EntitySpan>,
    /// Start or end markers without a partner, plus spans emptied by clamping.
    pub dropped: usize,
}

enum Role<'a> {
    Blank,
    Start(&'a str),
    End,
    Other,
}

/// Entity spans from the greedy path of a posterior grid.
pub fn ctc_entity_spans(grid: &PosteriorGrid, markers: &CtcMarkers, cfg: &NelConfig) -> Result<CtcSpans> {
    cfg.validate()?;
    let vocab = grid.vocab();
    let find = |tok: &str| vocab.iter().position(|v| v == tok);
    if find(&markers.blank).is_none() {
        return Err(Error::Vocabulary(markers.blank.clone()));
    }
    if find(&markers.end_marker).is_none() {
        return Err(Error::Vocabulary(markers.end_marker.clone()));
    }
    if markers.start_markers.is_empty() {
        return Err(Error::Parameter("no entity start markers configured".into()));
    }
    for s in markers.start_markers.keys() {
        if find(s).is_none() {
            return Err(Error::Vocabulary(s.clone()));
        }
    }
    let role = |id: usize| {
        let tok = vocab[id].as_str();
        if tok == markers.blank {
            Role::Blank
        } else if tok == markers.end_marker {
            Role::End
        } else if let Some(tag) = markers.start_markers.get(tok) {
            Role::Start(tag)
        } else {
            Role::Other
        }
    };
    // Runs of identical tokens: (token, first frame, last frame).
    let path = grid.greedy_path();
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    for (f, &tok) in path.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.0 == tok => r.2 = f,
            _ => runs.push((tok, f, f)),
        }
    }
    let fd = grid.frame_duration();
    let total = path.len() as f64 * fd;
    let mut out = CtcSpans::default();
    let mut open: Option<(&str, usize)> = None;
    for (k, &(tok, first, last)) in runs.iter().enumerate() {
        match role(tok) {
            Role::Start(tag) => {
                if open.is_some() {
                    out.dropped += 1;
                }
                open = Some((tag, first));
            }
            Role::End => {
                let Some((tag, start)) = open.take() else {
                    out.dropped += 1;
                    continue;
                };
                let mut end = last + 1;
                if cfg.incl_blank {
                    if let Some(&(next, _, blank_last)) = runs.get(k + 1) {
                        if matches!(role(next), Role::Blank) {
                            end = blank_last + 1;
                        }
                    }
                }
                let s = (start as f64 * fd + cfg.offset).clamp(0.0, total);
                let e = (end as f64 * fd + cfg.offset).clamp(0.0, total);
                if s < e {
                    out.spans.push(EntitySpan {
                        tag: tag.to_string(),
                        start: s,
                        end: e,
                    });
                } else {
                    out.dropped += 1;
                }
            }
            Role::Blank | Role::Other => {}
        }
    }
    if open.is_some() {
        out.dropped += 1;
    }
    if out.dropped > 0 {
        log::warn!("dropped {} unmatched entity markers", out.dropped);
    }
    Ok(out)
}

fn rasterize(spans: &[EntitySpan], fd: f64) -> BTreeSet<i64> {
    spans
        .iter()
        .flat_map(|s| (s.start / fd).round() as i64..(s.end / fd).round() as i64)
        .collect()
}

/// Frame-level overlap counts for one utterance; tags are ignored.
pub fn nel_frame_counts(hyp: &[EntitySpan], reference: &[EntitySpan], frame_duration: f64) -> F1Counts {
    let h = rasterize(hyp, frame_duration);
    let r = rasterize(reference, frame_duration);
    let tp = h.intersection(&r).count();
    F1Counts {
        tp,
        fp: h.len() - tp,
        fn_: r.len() - tp,
    }
}

/// Frame-F1 pooled over utterances `(hyp, ref)`.
pub fn nel_frame_f1(utts: &[(Vec<EntitySpan>, Vec<EntitySpan>)], frame_duration: f64) -> Result<(PrfScores, F1Counts)> {
    if !(frame_duration > 0.0) {
        return Err(Error::Parameter("frame duration must be positive".into()));
    }
    let mut total = F1Counts::default();
    for (h, r) in utts {
        total.add(nel_frame_counts(h, r, frame_duration));
    }
    Ok((total.scores(), total))
}

/// Sorted, merged copy of a set of intervals.
fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (s, e) in iv {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn overlap(lo: f64, hi: f64, merged: &[(f64, f64)]) -> f64 {
    merged.iter().map(|&(s, e)| (hi.min(e) - lo.max(s)).max(0.0)).sum()
}

/// Slack on the ρ comparison so exact decimal fractions count as reached.
const RHO_SLACK: f64 = 1e-9;

fn reaches(covered: f64, duration: f64, rho: f64) -> bool {
    covered >= rho * duration - RHO_SLACK
}

/// Reference words whose midpoint lies inside some entity span.
pub fn words_in_entities(words: &[(f64, f64)], entities: &[EntitySpan]) -> Vec<(f64, f64)> {
    words
        .iter()
        .copied()
        .filter(|&(s, e)| {
            let mid = (s + e) / 2.0;
            entities.iter().any(|en| mid >= en.start && mid < en.end)
        })
        .collect()
}

/// One utterance for word-F1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordF1Utterance {
    pub hyp: Vec<EntitySpan>,
    pub ref_entities: Vec<EntitySpan>,
    /// Reference words inside entities, as (start, end) seconds.
    pub ref_words: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WordF1Counts {
    pub words_detected: usize,
    pub words_total: usize,
    pub spans_correct: usize,
    pub spans_total: usize,
}

impl WordF1Counts {
    pub fn scores(&self) -> PrfScores {
        let precision = ratio(self.spans_correct, self.spans_total);
        let recall = ratio(self.words_detected, self.words_total);
        PrfScores {
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }

    /// tp = detected words, fn = missed words, fp = rejected spans.
    pub fn as_f1_counts(&self) -> F1Counts {
        F1Counts {
            tp: self.words_detected,
            fp: self.spans_total - self.spans_correct,
            fn_: self.words_total - self.words_detected,
        }
    }
}

/// Word-F1 at overlap fraction `rho`. A reference word is detected when
/// predicted spans cover at least `rho` of it; a predicted span is correct
/// when reference entity regions cover at least `rho` of it.
pub fn nel_word_f1(utts: &[WordF1Utterance], rho: f64) -> Result<(PrfScores, WordF1Counts)> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Parameter(format!("rho {rho} outside (0, 1]")));
    }
    let mut c = WordF1Counts::default();
    for u in utts {
        let hyp = merge(u.hyp.iter().map(|s| (s.start, s.end)).collect());
        let ents = merge(u.ref_entities.iter().map(|s| (s.start, s.end)).collect());
        for &(s, e) in &u.ref_words {
            c.words_total += 1;
            c.words_detected += usize::from(e > s && reaches(overlap(s, e, &hyp), e - s, rho));
        }
        for span in &u.hyp {
            c.spans_total += 1;
            let d = span.end - span.start;
            c.spans_correct += usize::from(reaches(overlap(span.start, span.end, &ents), d, rho));
        }
    }
    Ok((c.scores(), c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::FeatureMatrix;
    use proptest::prelude::*;

    fn span(s: f64, e: f64) -> EntitySpan {
        EntitySpan::new("X", s, e).unwrap()
    }

    fn grid(tokens: &[&str], vocab: &[&str]) -> PosteriorGrid {
        let rows: Vec<Vec<f64>> = tokens
            .iter()
            .map(|t| vocab.iter().map(|v| if v == t { 1.0 } else { 0.0 }).collect())
            .collect();
        PosteriorGrid::new(
            FeatureMatrix::from_rows(&rows).unwrap(),
            vocab.iter().map(|s| s.to_string()).collect(),
            0.02,
        )
        .unwrap()
    }

    const VOCAB: [&str; 6] = ["<b>", "#", "]", "|", "a", "b"];

    fn markers() -> CtcMarkers {
        CtcMarkers::new("<b>", "]", &[("#", "PLACE")])
    }

    fn close(a: &EntitySpan, s: f64, e: f64) -> bool {
        (a.start - s).abs() < 1e-12 && (a.end - e).abs() < 1e-12
    }

    #[test]
    fn ctc_examples() {
        let g = grid(&["#", "a", "|", "b", "]"], &VOCAB);
        let out = ctc_entity_spans(&g, &markers(), &NelConfig::default()).unwrap();
        assert_eq!(out.spans.len(), 1);
        assert_eq!(out.spans[0].tag, "PLACE");
        assert!(close(&out.spans[0], 0.0, 0.10));

        let g = grid(&["#", "a", "|", "b", "]", "<b>", "<b>"], &VOCAB);
        let incl = NelConfig {
            incl_blank: true,
            ..Default::default()
        };
        assert!(close(&ctc_entity_spans(&g, &markers(), &incl).unwrap().spans[0], 0.0, 0.14));
        assert!(close(&ctc_entity_spans(&g, &markers(), &NelConfig::default()).unwrap().spans[0], 0.0, 0.10));

        let shifted = NelConfig {
            offset: -0.04,
            ..Default::default()
        };
        assert!(close(&ctc_entity_spans(&g, &markers(), &shifted).unwrap().spans[0], 0.0, 0.06));
    }

    #[test]
    fn ctc_start_run_and_unmatched() {
        let g = grid(&["a", "#", "#", "a", "]", "]", "a", "]", "#", "b"], &VOCAB);
        let out = ctc_entity_spans(&g, &markers(), &NelConfig::default()).unwrap();
        assert_eq!(out.spans.len(), 1);
        assert!(close(&out.spans[0], 0.02, 0.12));
        assert_eq!(out.dropped, 2);
    }

    #[test]
    fn ctc_vocab_checks() {
        let g = grid(&["a", "b"], &["<b>", "a", "b"]);
        assert!(matches!(
            ctc_entity_spans(&g, &markers(), &NelConfig::default()),
            Err(Error::Vocabulary(_))
        ));
    }

    #[test]
    fn frame_examples() {
        let r = vec![span(0.0, 0.2), span(0.4, 0.6)];
        let (s, _) = nel_frame_f1(&[(r.clone(), r.clone())], 0.02).unwrap();
        assert_eq!(s.f1, 1.0);
        let half = vec![span(0.0, 0.1), span(0.4, 0.5)];
        let (s, c) = nel_frame_f1(&[(half, r.clone())], 0.02).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
        assert_eq!((c.tp, c.fp, c.fn_), (10, 0, 10));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        let (s, _) = nel_frame_f1(&[(vec![span(1.0, 1.2)], r)], 0.02).unwrap();
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn word_examples() {
        let ent = vec![span(1.0, 2.0)];
        let u = |hyp: Vec<EntitySpan>| WordF1Utterance {
            hyp,
            ref_entities: ent.clone(),
            ref_words: vec![(1.0, 2.0)],
        };
        assert_eq!(nel_word_f1(&[u(ent.clone())], 1.0).unwrap().0.f1, 1.0);
        let partial = [u(vec![span(1.0, 1.8)])];
        assert_eq!(nel_word_f1(&partial, 0.8).unwrap().1.words_detected, 1);
        assert_eq!(nel_word_f1(&partial, 1.0).unwrap().1.words_detected, 0);
        assert!(nel_word_f1(&partial, 0.0).is_err());
    }

    #[test]
    fn midpoint_selection() {
        let words = [(0.0, 0.5), (0.9, 1.3), (1.9, 2.5)];
        assert_eq!(words_in_entities(&words, &[span(1.0, 2.0)]), vec![(0.9, 1.3)]);
    }

    fn arb_spans() -> impl Strategy<Value = Vec<EntitySpan>> {
        prop::collection::vec((0u32..50, 1u32..20), 0..5)
            .prop_map(|v| v.into_iter().map(|(s, d)| span(s as f64 * 0.02, (s + d) as f64 * 0.02)).collect())
    }

    proptest! {
        #[test]
        fn splitting_a_span_keeps_frame_f1(r in arb_spans(), s in 0u32..50, d in 2u32..20, cut in 1u32..20) {
            let cut = cut.min(d - 1);
            let whole = vec![span(s as f64 * 0.02, (s + d) as f64 * 0.02)];
            let split = vec![span(s as f64 * 0.02, (s + cut) as f64 * 0.02), span((s + cut) as f64 * 0.02, (s + d) as f64 * 0.02)];
            prop_assert_eq!(nel_frame_counts(&whole, &r, 0.02), nel_frame_counts(&split, &r, 0.02));
        }

        #[test]
        fn word_f1_non_increasing_in_rho(hyp in arb_spans(), ents in arb_spans()) {
            let words: Vec<(f64, f64)> = ents.iter().map(|e| (e.start, e.end)).collect();
            let u = [WordF1Utterance { hyp, ref_entities: ents, ref_words: words }];
            let f: Vec<f64> = [0.5, 0.8, 1.0].iter().map(|&r| nel_word_f1(&u, r).unwrap().0.f1).collect();
            prop_assert!(f[0] >= f[1] && f[1] >= f[2]);
        }
    }
}
