use std::collections::BTreeSet;
use std::fmt::Write as _;

use anyhow::Result;
use serde_json::json;

use rprobe::dataio::{read_awd_pairs, read_feature_matrix, read_segments, read_sts_manifest, FeatureMatrix};
use rprobe::freetasks::{
    awd_score, detect_word_boundaries, evaluate_segmentation, grid_search, group_sts_rows,
    reference_boundaries, sts_correlation, AwdConfig, AwdSimilarity, BoundaryConfig, SegGrid,
    SegUtterance,
};
use rprobe::report::ScoreRecord;
use rprobe::spanpool::{pool_span, time_to_frames, SpanSpec};
use rprobe::Mat;

use super::{config, per_layer, scored};
use crate::args::{AwdArgs, AwdMetric, Global, PoolArgs, StsArgs, WordsegArgs};
use crate::inputs::{layer_dir, layer_file, load, read_utterances, resolve_views, LayerInput};
use crate::output::Outcome;
use crate::usage;

/// Output name for a per-layer file: `stem.ext` for a single input, `stem_layer_i.ext` otherwise.
fn layer_output(l: &LayerInput, stem: &str, ext: &str) -> String {
    match l.layer {
        Some(i) => format!("{stem}_layer_{i}.{ext}"),
        None => format!("{stem}.{ext}"),
    }
}

pub fn awd(a: &AwdArgs, g: &Global) -> Result<Outcome> {
    if !(a.min_duration <= a.max_duration) {
        return Err(usage("--min-duration exceeds --max-duration"));
    }
    let pairs = load(&a.pairs, |p| read_awd_pairs(p))?;
    let layers = resolve_views(&a.views, layer_dir)?;
    let sim = match a.metric {
        AwdMetric::Pooled => AwdSimilarity::Pooled(a.pool),
        AwdMetric::Dtw => AwdSimilarity::Dtw(a.dtw_norm),
    };
    let cfg = AwdConfig {
        frame_duration: a.frame_duration,
        min_duration: a.min_duration,
        max_duration: a.max_duration,
    };
    let utts: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|p| [p.utt_a.as_str(), p.utt_b.as_str()])
        .collect();
    let records = per_layer(&layers, |l| {
        let feats = read_utterances(&l.path, utts.iter().copied())?;
        let o = awd_score(&pairs, &feats, sim, &cfg)?;
        let c = json!({"similarity": sim, "awd": cfg, "scored": o.scored, "skipped": o.skipped});
        Ok(ScoreRecord::new(l.layer, "awd-ap", o.average_precision, 0.0).with_config(config(g, c)))
    })?;
    Ok(scored("awd-ap", records))
}

pub fn wordseg(a: &WordsegArgs, g: &Global) -> Result<Outcome> {
    let table = load(&a.segments, |p| read_segments(p))?;
    let words = table.by_utterance();
    let layers = resolve_views(&a.views, layer_dir)?;
    let matching = a.matching.into();
    let results = per_layer(&layers, |l| {
        let feats = read_utterances(&l.path, words.keys().copied())?;
        let refs: Vec<(&str, &Mat, Vec<f64>)> = words
            .iter()
            .map(|(u, w)| {
                let frames = &feats[*u];
                let duration = frames.nrows() as f64 * a.frame_duration;
                (*u, frames, reference_boundaries(w, duration))
            })
            .collect();
        let utts: Vec<SegUtterance<'_>> = refs
            .iter()
            .map(|(_, frames, r)| SegUtterance {
                frames,
                reference: r,
            })
            .collect();
        let (cfg, s) = if a.grid {
            grid_search(&utts, &SegGrid::default(), a.frame_duration, a.tolerance, matching)?
        } else {
            let cfg = BoundaryConfig {
                distance: a.metric,
                smooth_window: a.window,
                prominence: a.prominence,
                frame_duration: a.frame_duration,
            };
            (cfg, evaluate_segmentation(&utts, &cfg, a.tolerance, matching)?)
        };
        let mut tsv = String::new();
        for (u, frames, _) in &refs {
            for t in detect_word_boundaries(frames, &cfg)? {
                let _ = writeln!(tsv, "{u}\t{t:.6}");
            }
        }
        let c = json!({
            "boundary": cfg,
            "tolerance": a.tolerance,
            "matching": matching,
            "precision": s.precision,
            "recall": s.recall,
            "r_value": s.r_value,
        });
        let rec = ScoreRecord::new(l.layer, "wordseg-f1", s.f1, 0.0).with_config(config(g, c));
        Ok((rec, (layer_output(l, "boundaries", "tsv"), tsv)))
    })?;
    let (records, files): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let mut out = scored("wordseg-f1", records);
    for (name, tsv) in files {
        out = out.with_file(name, tsv);
    }
    Ok(out)
}

pub fn sts(a: &StsArgs, g: &Global) -> Result<Outcome> {
    let rows = load(&a.manifest, |p| read_sts_manifest(p))?;
    let pairs = load(&a.manifest, |_| group_sts_rows(&rows))?;
    let rho = sts_correlation(&pairs, |p| Ok(read_feature_matrix(p)?.to_dmatrix()))?;
    let c = json!({"pairs": pairs.len(), "renderings": rows.len()});
    let records = vec![ScoreRecord::new(None, "sts-spearman", rho, 0.0).with_config(config(g, c))];
    Ok(scored("sts-spearman", records))
}

pub fn pool(a: &PoolArgs, g: &Global) -> Result<Outcome> {
    if g.out.is_none() {
        return Err(usage("pool writes feature files and needs --out"));
    }
    let table = load(&a.segments, |p| read_segments(p))?;
    let segs = table.entries();
    let layers = resolve_views(&a.views, layer_dir)?;
    let pooled = per_layer(&layers, |l| {
        let feats = read_utterances(&l.path, segs.iter().map(|s| s.utt_id.as_str()))?;
        let mut m: Option<Mat> = None;
        for (row, s) in segs.iter().enumerate() {
            let frames = &feats[&s.utt_id];
            let (lo, hi) = time_to_frames(s.start, s.end, a.frame_duration, frames.nrows())?;
            let v = pool_span(frames, &SpanSpec::new(a.pool, lo, hi)?)?;
            let m = m.get_or_insert_with(|| Mat::zeros(segs.len(), v.len()));
            m.row_mut(row).tr_copy_from(&v);
        }
        let m = m.ok_or_else(|| rprobe::Error::Data("segment table is empty".into()))?;
        let name = match l.layer {
            Some(i) => layer_file(i),
            None => "pooled.rpfm".to_string(),
        };
        Ok((l.layer, name, FeatureMatrix::from_dmatrix(&m)?))
    })?;
    let dim = pooled.first().map_or(0, |p| p.2.cols());
    let labels: String = segs.iter().map(|s| format!("{}\n", s.label)).collect();
    let mut out = Outcome::new(format!(
        "pool {}: {} segments x {dim} dims from {} input(s)",
        a.pool,
        segs.len(),
        pooled.len()
    ))
    .with_file("labels.txt", labels);
    let mut manifest = String::new();
    for (layer, name, m) in pooled {
        if let Some(i) = layer {
            let _ = writeln!(manifest, "{i}\t{name}");
        }
        out = out.with_file(name, m.to_bytes());
    }
    if !manifest.is_empty() {
        out = out.with_file("layers.tsv", manifest);
    }
    Ok(out)
}
