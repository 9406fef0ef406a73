use std::collections::BTreeMap;

use anyhow::Result;
use rayon::prelude::*;

use rprobe::dataio::{read_feature_matrix, read_segments, read_vocab, PosteriorGrid};
use rprobe::slueval::{
    align_records, ctc_entity_spans, label_counts, ner_micro_counts, nel_frame_f1, nel_word_f1,
    read_entity_records, words_in_entities, CtcMarkers, EntityRecord, EntitySpan, F1Counts,
    MetricScore, NelConfig, WordF1Utterance,
};

use crate::args::{Global, NelArgs, NerArgs};
use crate::inputs::load;
use crate::output::Outcome;
use crate::usage;

fn metric(name: &str, counts: F1Counts) -> MetricScore {
    MetricScore {
        metric: name.to_string(),
        value: counts.f1(),
        counts,
    }
}

fn summarize(scores: &[MetricScore]) -> String {
    scores
        .iter()
        .map(|s| format!("{}: {:.6}", s.metric, s.value))
        .collect::<Vec<_>>()
        .join(", ")
}

fn finish(scores: Vec<MetricScore>) -> Outcome {
    Outcome::new(summarize(&scores)).with_scores(&scores)
}

pub fn ner_eval(a: &NerArgs, _g: &Global) -> Result<Outcome> {
    let hyp = load(&a.hyp, |p| read_entity_records(p))?;
    let reference = load(&a.reference, |p| read_entity_records(p))?;
    let pairs = align_records(&hyp, &reference);
    let tuples = |r: Option<&EntityRecord>| r.map(|r| r.tuples.clone()).unwrap_or_default();
    let h: Vec<_> = pairs.iter().map(|(h, _)| tuples(*h)).collect();
    let r: Vec<_> = pairs.iter().map(|(_, r)| tuples(*r)).collect();
    Ok(finish(vec![
        metric("ner-micro-f1", ner_micro_counts(&h, &r)),
        metric("ner-label-f1", label_counts(&h, &r)),
    ]))
}

/// Hypothesis spans per reference utterance, read off CTC posteriors.
fn posterior_spans(a: &NelArgs, reference: &[EntityRecord]) -> Result<Vec<EntityRecord>> {
    let (Some(dir), Some(vocab)) = (&a.posteriors, &a.vocab) else {
        return Err(usage("--posteriors needs --vocab"));
    };
    if a.start_marker.is_empty() {
        return Err(usage("--posteriors needs at least one --start-marker TOKEN=TAG"));
    }
    let vocab = load(vocab, |p| read_vocab(p))?;
    let starts: Vec<(&str, &str)> = a
        .start_marker
        .iter()
        .map(|(t, g)| (t.as_str(), g.as_str()))
        .collect();
    let markers = CtcMarkers::new(&a.blank, &a.end_marker, &starts);
    let cfg = NelConfig {
        offset: a.offset,
        incl_blank: a.incl_blank,
        rho: 1.0,
    };
    let decoded = reference
        .par_iter()
        .map(|r| {
            let path = dir.join(format!("{}.rpfm", r.utt_id));
            let probs = load(&path, |p| read_feature_matrix(p))?;
            let grid = load(&path, |_| PosteriorGrid::new(probs, vocab.clone(), a.frame_duration))?;
            let spans = load(&path, |_| ctc_entity_spans(&grid, &markers, &cfg))?;
            Ok((r.utt_id.clone(), spans))
        })
        .collect::<Result<Vec<_>>>()?;
    let dropped: usize = decoded.iter().map(|(_, s)| s.dropped).sum();
    if dropped > 0 {
        log::warn!("dropped {dropped} unmatched entity markers");
    }
    Ok(decoded
        .into_iter()
        .map(|(utt_id, s)| EntityRecord {
            utt_id,
            tuples: Vec::new(),
            spans: s.spans,
        })
        .collect())
}

pub fn nel_eval(a: &NelArgs, _g: &Global) -> Result<Outcome> {
    let reference = load(&a.reference, |p| read_entity_records(p))?;
    let hyp = match &a.hyp {
        Some(h) => {
            if a.offset != 0.0 || a.incl_blank {
                log::warn!("--offset and --incl-blank only apply to --posteriors");
            }
            load(h, |p| read_entity_records(p))?
        }
        None => posterior_spans(a, &reference)?,
    };
    let pairs = align_records(&hyp, &reference);
    let spans = |r: Option<&EntityRecord>| r.map(|r| r.spans.clone()).unwrap_or_default();
    let utts: Vec<(String, Vec<EntitySpan>, Vec<EntitySpan>)> = pairs
        .iter()
        .map(|(h, r)| {
            let id = r.or(*h).map(|x| x.utt_id.clone()).unwrap_or_default();
            (id, spans(*h), spans(*r))
        })
        .collect();
    let frame_input: Vec<_> = utts.iter().map(|(_, h, r)| (h.clone(), r.clone())).collect();
    let (_, frame_counts) = nel_frame_f1(&frame_input, a.frame_duration)?;
    let mut scores = vec![metric("nel-frame-f1", frame_counts)];
    if let Some(seg) = &a.segments {
        let table = load(seg, |p| read_segments(p))?;
        let words: BTreeMap<&str, Vec<(f64, f64)>> = table
            .by_utterance()
            .into_iter()
            .map(|(u, w)| (u, w.iter().map(|s| (s.start, s.end)).collect()))
            .collect();
        let word_utts: Vec<WordF1Utterance> = utts
            .iter()
            .map(|(id, h, r)| WordF1Utterance {
                hyp: h.clone(),
                ref_entities: r.clone(),
                ref_words: words
                    .get(id.as_str())
                    .map(|w| words_in_entities(w, r))
                    .unwrap_or_default(),
            })
            .collect();
        for &rho in &a.rho {
            let (s, c) = nel_word_f1(&word_utts, rho)?;
            scores.push(MetricScore {
                metric: format!("nel-word-f1@{rho}"),
                value: s.f1,
                counts: c.as_f1_counts(),
            });
        }
    }
    let mut out = finish(scores);
    if a.segments.is_some() {
        out.notes = Some(serde_json::json!({
            "word_f1_recall": "reference entity words covered by predicted spans for at least rho of their duration",
            "word_f1_precision": "predicted spans covered by reference entity regions for at least rho of their duration",
        }));
    }
    Ok(out)
}
