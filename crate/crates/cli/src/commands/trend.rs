use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;

use rprobe::report::ScoreRecord;
use rprobe::trends::{curve_correlation_matrix, export_scatter, scatter_csv, LayerCurve};

use crate::args::{Global, TrendArgs};
use crate::inputs::load;
use crate::output::Outcome;
use crate::usage;

fn read_records(path: &Path) -> Result<Vec<ScoreRecord>> {
    load(path, |p| {
        let text = std::fs::read_to_string(p).map_err(|e| rprobe::Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| rprobe::Error::Format(e.to_string()))
    })
}

/// One curve per (file, metric), named by the metric unless that name
/// occurs in several files.
fn curves(a: &TrendArgs) -> Result<Vec<LayerCurve>> {
    let mut grouped: Vec<(String, String, Vec<(usize, f64, f64)>)> = Vec::new();
    for path in &a.scores {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut by_metric: Vec<(String, Vec<(usize, f64, f64)>)> = Vec::new();
        for r in read_records(path)? {
            if !a.metric.is_empty() && !a.metric.contains(&r.metric) {
                continue;
            }
            let layer = r.layer.ok_or_else(|| {
                anyhow::Error::new(rprobe::Error::Data(format!("record {:?} has no layer", r.metric)))
                    .context(path.display().to_string())
            })?;
            match by_metric.iter_mut().find(|(m, _)| *m == r.metric) {
                Some((_, pts)) => pts.push((layer, r.score, r.spread)),
                None => by_metric.push((r.metric.clone(), vec![(layer, r.score, r.spread)])),
            }
        }
        grouped.extend(by_metric.into_iter().map(|(m, p)| (stem.clone(), m, p)));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, m, _) in &grouped {
        *counts.entry(m).or_default() += 1;
    }
    grouped
        .iter()
        .map(|(stem, m, pts)| {
            let name = if counts[m.as_str()] > 1 {
                format!("{stem}:{m}")
            } else {
                m.clone()
            };
            let mut pts = pts.clone();
            pts.sort_by_key(|p| p.0);
            let curve = LayerCurve::new(
                a.model.clone(),
                name,
                pts.iter().map(|p| p.0).collect(),
                pts.iter().map(|p| p.1).collect(),
                pts.iter().map(|p| p.2).collect(),
            )?;
            Ok(curve)
        })
        .collect()
}

pub fn trend_corr(a: &TrendArgs, _g: &Global) -> Result<Outcome> {
    let curves = curves(a)?;
    if curves.len() < 2 {
        return Err(rprobe::Error::Data(format!(
            "need at least 2 curves, found {}",
            curves.len()
        ))
        .into());
    }
    let m = curve_correlation_matrix(&curves)?;
    let mut json = m.to_json();
    json.push('\n');
    let mut out = Outcome::new(format!(
        "trend-corr: {} curves over {} shared layers",
        curves.len(),
        m.layers.len()
    ))
    .with_file("correlations.json", json)
    .with_file("correlations.dat", m.to_gnuplot());
    if let (Some(x), Some(y)) = (&a.scatter_x, &a.scatter_y) {
        let find = |name: &str| {
            curves
                .iter()
                .find(|c| c.metric_id == name)
                .ok_or_else(|| usage(format!("no curve named {name:?}")))
        };
        let rows = export_scatter(find(x)?, find(y)?, a.transform)?;
        out = out.with_file("scatter.csv", scatter_csv(&rows));
    }
    Ok(out)
}
