use std::collections::HashMap;
use std::path::PathBuf;

use rayon::prelude::*;

use super::awd::cosine;
use crate::dataio::StsManifestRow;
use crate::linalg::{column_means, Mat};
use crate::trends::spearman;
use crate::{Error, Result};

/// One sentence pair with every speaker rendering of it.
#[derive(Debug, Clone, PartialEq)]
pub struct StsPair {
    pub pair_id: String,
    pub human_score: f64,
    pub renderings: Vec<(PathBuf, PathBuf)>,
}

/// Groups manifest rows by pair id, in order of first appearance.
pub fn group_sts_rows(rows: &[StsManifestRow]) -> Result<Vec<StsPair>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut pairs: Vec<StsPair> = Vec::new();
    for r in rows {
        match index.get(r.pair_id.as_str()) {
            Some(&i) => {
                if pairs[i].human_score != r.human_score {
                    return Err(Error::Data(format!(
                        "pair {} has conflicting human scores {} and {}",
                        r.pair_id, pairs[i].human_score, r.human_score
                    )));
                }
                pairs[i].renderings.push((r.feat_a.clone(), r.feat_b.clone()));
            }
            None => {
                index.insert(&r.pair_id, pairs.len());
                pairs.push(StsPair {
                    pair_id: r.pair_id.clone(),
                    human_score: r.human_score,
                    renderings: vec![(r.feat_a.clone(), r.feat_b.clone())],
                });
            }
        }
    }
    Ok(pairs)
}

/// Mean cosine similarity of mean-pooled sentence vectors over renderings.
pub fn sts_pair_score(renderings: &[(Mat, Mat)]) -> Result<f64> {
    if renderings.is_empty() {
        return Err(Error::Data("sentence pair without renderings".into()));
    }
    let mut total = 0.0;
    for (a, b) in renderings {
        if a.nrows() == 0 || b.nrows() == 0 {
            return Err(Error::Shape("empty sentence features".into()));
        }
        total += cosine(column_means(a).as_slice(), column_means(b).as_slice())?;
    }
    Ok(total / renderings.len() as f64)
}

/// Spearman correlation between predicted similarities and human scores.
/// `load` maps a feature path to its frame matrix.
pub fn sts_correlation<F>(pairs: &[StsPair], load: F) -> Result<f64>
where
    F: Fn(&std::path::Path) -> Result<Mat> + Sync,
{
    if pairs.len() < 3 {
        return Err(Error::Shape(format!("need at least 3 pairs, got {}", pairs.len())));
    }
    let predicted = pairs
        .par_iter()
        .map(|p| {
            let loaded = p
                .renderings
                .iter()
                .map(|(a, b)| Ok((load(a)?, load(b)?)))
                .collect::<Result<Vec<_>>>()?;
            sts_pair_score(&loaded)
        })
        .collect::<Result<Vec<f64>>>()?;
    let human: Vec<f64> = pairs.iter().map(|p| p.human_score).collect();
    spearman(&predicted, &human)
}

/// Multiset token overlap divided by the longer sentence length.
pub fn naive_text_overlap<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("text overlap needs non-empty token lists".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in a {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut shared = 0;
    for t in b {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    Ok(shared as f64 / a.len().max(b.len()) as f64)
}
