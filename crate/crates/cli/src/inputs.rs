use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use rprobe::cca::CvPlan;
use rprobe::dataio::{read_attribute_map, read_feature_matrix, read_label_tokens, LabelVector};
use rprobe::Mat;

use crate::args::{Target, TargetOpts, Views};
use crate::usage;

/// Attaches the file path to errors that do not already carry it.
pub fn load<T>(path: &Path, f: impl FnOnce(&Path) -> rprobe::Result<T>) -> Result<T> {
    f(path).map_err(|e| match e {
        e @ rprobe::Error::Io { .. } => anyhow::Error::new(e),
        e => anyhow::Error::new(e).context(path.display().to_string()),
    })
}

pub fn read_matrix(path: &Path) -> Result<Mat> {
    Ok(load(path, |p| read_feature_matrix(p))?.to_dmatrix())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerInput {
    pub layer: Option<usize>,
    pub path: PathBuf,
}

/// Parses `layer_index[<TAB>path]` lines. Missing paths default to
/// `default(layer)`; relative paths resolve against `base`.
pub fn parse_manifest(
    text: &str,
    base: &Path,
    default: impl Fn(usize) -> String,
) -> Result<Vec<LayerInput>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(2, '\t');
        let idx = fields.next().unwrap_or_default().trim();
        let layer: usize = idx
            .parse()
            .map_err(|_| rprobe::Error::Parse {
                line: i + 1,
                msg: format!("layer index {idx:?} is not a non-negative integer"),
            })?;
        if !seen.insert(layer) {
            return Err(rprobe::Error::Parse {
                line: i + 1,
                msg: format!("layer {layer} listed twice"),
            }
            .into());
        }
        let rel = match fields.next().map(str::trim) {
            Some(p) if !p.is_empty() => p.to_string(),
            _ => default(layer),
        };
        out.push(LayerInput {
            layer: Some(layer),
            path: base.join(rel),
        });
    }
    if out.is_empty() {
        return Err(rprobe::Error::Data("layer manifest lists no layers".into()).into());
    }
    Ok(out)
}

/// Inputs named by `--x` or `--layers`.
pub fn resolve_views(views: &Views, default: impl Fn(usize) -> String) -> Result<Vec<LayerInput>> {
    match (&views.x, &views.layers) {
        (Some(x), None) => Ok(vec![LayerInput {
            layer: None,
            path: x.clone(),
        }]),
        (None, Some(m)) => {
            let text = load(m, |p| {
                std::fs::read_to_string(p).map_err(|e| rprobe::Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })
            })?;
            let base = m.parent().unwrap_or(Path::new("."));
            parse_manifest(&text, base, default).with_context(|| m.display().to_string())
        }
        _ => Err(usage("exactly one of --x and --layers is required")),
    }
}

pub fn layer_file(i: usize) -> String {
    format!("layer_{i}.rpfm")
}

pub fn layer_dir(i: usize) -> String {
    format!("layer_{i}")
}

pub fn read_tokens(path: &Path) -> Result<Vec<String>> {
    load(path, |p| read_label_tokens(p))
}

/// Vocabulary from `--vocab`, or the sorted distinct tokens.
pub fn vocabulary(tokens: &[String], vocab: Option<&Path>) -> Result<Vec<String>> {
    match vocab {
        Some(v) => read_tokens(v),
        None => Ok(tokens
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()),
    }
}

pub fn read_labels(path: &Path, vocab: Option<&Path>) -> Result<LabelVector> {
    let tokens = read_tokens(path)?;
    let vocab = vocabulary(&tokens, vocab)?;
    load(path, |_| LabelVector::from_tokens(&tokens, &vocab))
}

/// Target view: continuous features, attribute vectors of labels, or one-hot labels.
pub fn read_target(target: &Target, opts: &TargetOpts) -> Result<Mat> {
    match (&target.y, &target.labels) {
        (Some(y), None) => read_matrix(y),
        (None, Some(l)) => match &opts.attributes {
            Some(a) => {
                let map = load(a, |p| read_attribute_map(p))?;
                let tokens = read_tokens(l)?;
                load(l, |_| map.lookup_matrix(&tokens))
            }
            None => Ok(read_labels(l, opts.vocab.as_deref())?.one_hot()),
        },
        _ => Err(usage("exactly one of --y and --labels is required")),
    }
}

/// Disjoint row subsets in seeded random order.
pub fn sample_sets(n: usize, sets: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if sets == 0 {
        return Err(usage("--sample-sets must be at least 1"));
    }
    let plan = CvPlan {
        num_splits: sets,
        ..CvPlan::default()
    }
    .with_seed(seed);
    let folds = plan.folds(n);
    if folds.iter().any(|f| f.len() < 2) {
        return Err(rprobe::Error::Shape(format!("{n} rows cannot fill {sets} sample sets")).into());
    }
    Ok(folds)
}

/// Loads `<dir>/<utt>.rpfm` (or `.csv`) for every utterance id.
pub fn read_utterances<'a>(
    dir: &Path,
    utts: impl IntoIterator<Item = &'a str>,
) -> Result<BTreeMap<String, Mat>> {
    let mut out = BTreeMap::new();
    for u in utts {
        if out.contains_key(u) {
            continue;
        }
        let bin = dir.join(format!("{u}.rpfm"));
        let csv = dir.join(format!("{u}.csv"));
        let path = if !bin.exists() && csv.exists() { csv } else { bin };
        out.insert(u.to_string(), read_matrix(&path)?);
    }
    Ok(out)
}
