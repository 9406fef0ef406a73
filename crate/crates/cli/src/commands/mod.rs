pub mod similarity;
pub mod slu;
pub mod tasks;
pub mod trend;

use anyhow::{Context, Result};
use rayon::prelude::*;

use rprobe::report::ScoreRecord;
use rprobe::selfcheck::run_selfcheck;

use crate::args::Global;
use crate::inputs::LayerInput;
use crate::output::Outcome;

/// Record config: the global sampling settings plus command-specific fields.
pub fn config(g: &Global, extra: serde_json::Value) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    map.insert("seed".into(), g.seed.into());
    map.insert("sample_sets".into(), g.sample_sets.into());
    if let serde_json::Value::Object(e) = extra {
        map.extend(e);
    }
    serde_json::Value::Object(map)
}

/// Runs `f` on every layer in parallel; results keep manifest order.
pub fn per_layer<T, F>(layers: &[LayerInput], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&LayerInput) -> Result<T> + Sync,
{
    layers
        .par_iter()
        .map(|l| match l.layer {
            Some(i) => f(l).with_context(|| format!("layer {i}")),
            None => f(l),
        })
        .collect()
}

pub fn scored(metric: &str, records: Vec<ScoreRecord>) -> Outcome {
    Outcome::new(crate::output::summarize(metric, &records)).with_scores(&records)
}

pub fn selfcheck(g: &Global) -> Result<Outcome> {
    let report = run_selfcheck(g.seed)?;
    let passed = report.checks.iter().filter(|c| c.passed).count();
    for c in report.checks.iter().filter(|c| !c.passed) {
        log::error!("check {} failed with value {}", c.name, c.value);
    }
    let mut json = report.to_json();
    json.push('\n');
    let mut out = Outcome::new(format!(
        "selfcheck: {passed}/{} checks passed (seed {})",
        report.checks.len(),
        g.seed
    ))
    .with_file("selfcheck.json", json);
    out.failed = !report.all_passed();
    Ok(out)
}
