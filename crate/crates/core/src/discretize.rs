//! Mini-batch k-means discretization and entropy-normalized discrete
//! mutual information against class labels.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{read_feature_matrix, write_feature_matrix, FeatureMatrix, LabelVector};
use crate::linalg::Mat;
use crate::{Error, Result};

/// Cluster counts swept for 39-class phone labels.
pub const PHONE_K_GRID: [usize; 6] = [39, 78, 150, 350, 500, 1000];
/// Cluster counts swept for 500-class word labels.
pub const WORD_K_GRID: [usize; 6] = [500, 1000, 1500, 2500, 3500, 5000];
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const PHONE_BATCH_SIZE: usize = 1500;
pub const WORD_BATCH_SIZE: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansMode {
    MiniBatch,
    /// Lloyd iterations over every row; the objective never increases.
    FullBatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub batch_size: usize,
    /// Passes over the data (mini-batch) or Lloyd iterations (full batch).
    pub max_iters: usize,
    pub seed: u64,
    pub mode: KMeansMode,
    /// Stop after this many mini-batch steps without improvement of the
    /// smoothed batch objective.
    pub max_no_improvement: Option<usize>,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            batch_size: PHONE_BATCH_SIZE,
            max_iters: DEFAULT_MAX_ITERS,
            seed,
            mode: KMeansMode::MiniBatch,
            max_no_improvement: Some(10),
        }
    }
}

/// Metadata stored next to the centroid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSidecar {
    pub k: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone)]
pub struct KMeansModel {
    pub centroids: Mat,
    pub config: KMeansConfig,
    /// Mini-batch steps (or Lloyd iterations) actually run.
    pub steps: usize,
    /// Objective on all rows after each full pass, full-batch mode only.
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn save(&self, centroid_path: &Path, sidecar_path: &Path) -> Result<()> {
        write_feature_matrix(centroid_path, &FeatureMatrix::from_dmatrix(&self.centroids)?)?;
        let meta = KMeansSidecar {
            k: self.config.k,
            seed: self.config.seed,
            batch_size: self.config.batch_size,
            max_iters: self.config.max_iters,
        };
        let text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
        std::fs::write(sidecar_path, text).map_err(|e| Error::io(sidecar_path, e))
    }

    pub fn load(centroid_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let centroids = read_feature_matrix(centroid_path)?.to_dmatrix();
        let text = std::fs::read_to_string(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
        let meta: KMeansSidecar =
            serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if meta.k != centroids.nrows() {
            return Err(Error::Shape(format!(
                "sidecar k={} but {} centroids",
                meta.k,
                centroids.nrows()
            )));
        }
        let mut config = KMeansConfig::new(meta.k, meta.seed);
        config.batch_size = meta.batch_size;
        config.max_iters = meta.max_iters;
        Ok(Self {
            centroids,
            config,
            steps: 0,
            inertia_history: Vec::new(),
        })
    }
}

fn sq_dist(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct_rows(x: &Mat) -> usize {
    let mut seen = HashSet::new();
    for r in 0..x.nrows() {
        let key: Vec<u64> = x.row(r).iter().map(|v| (v + 0.0).to_bits()).collect();
        seen.insert(key);
    }
    seen.len()
}

/// k-means++ seeding: first centroid uniform, then proportional to squared
/// distance from the nearest chosen centroid.
fn kmeans_pp(x: &Mat, k: usize, rng: &mut ChaCha8Rng) -> Mat {
    let n = x.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|r| sq_dist(x.row(r).iter().copied(), x.row(chosen[0]).iter().copied()))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let c = pick.expect("distinct rows remain");
        chosen.push(c);
        let crow = x.row(c).into_owned();
        d2.par_iter_mut().enumerate().for_each(|(r, best)| {
            let d = sq_dist(x.row(r).iter().copied(), crow.iter().copied());
            if d < *best {
                *best = d;
            }
        });
    }
    x.select_rows(&chosen)
}

/// Nearest centroid per row via `|x|^2 - 2 x.c + |c|^2`, for training batches.
fn assign_fast(batch: &Mat, centroids: &Mat, c_norms: &[f64]) -> Vec<(usize, f64)> {
    let dots = batch * centroids.transpose();
    (0..batch.nrows())
        .map(|r| {
            let xn = batch.row(r).norm_squared();
            let mut best = (0, f64::MAX);
            for j in 0..centroids.nrows() {
                let d = xn - 2.0 * dots[(r, j)] + c_norms[j];
                if d < best.1 {
                    best = (j, d);
                }
            }
            (best.0, best.1.max(0.0))
        })
        .collect()
}

fn centroid_norms(c: &Mat) -> Vec<f64> {
    c.row_iter().map(|r| r.norm_squared()).collect()
}

pub fn kmeans_fit(x: &Mat, cfg: &KMeansConfig) -> Result<KMeansModel> {
    let n = x.nrows();
    if cfg.k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    if cfg.k > n {
        return Err(Error::Parameter(format!("k={} exceeds {n} rows", cfg.k)));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".into()));
    }
    let distinct = count_distinct_rows(x);
    if cfg.k > distinct {
        return Err(Error::Parameter(format!(
            "k={} exceeds {distinct} distinct rows",
            cfg.k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = kmeans_pp(x, cfg.k, &mut rng);
    match cfg.mode {
        KMeansMode::FullBatch => lloyd(x, centroids, cfg),
        KMeansMode::MiniBatch => {
            let batch = cfg.batch_size.min(n);
            let total_steps = (cfg.max_iters * n).div_ceil(batch);
            let mut counts = vec![0usize; cfg.k];
            let alpha = (2.0 * batch as f64 / (n as f64 + 1.0)).min(1.0);
            let mut ewa: Option<f64> = None;
            let mut best = f64::MAX;
            let mut stale = 0;
            let mut steps = 0;
            let all: Vec<usize> = (0..n).collect();
            for _ in 0..total_steps {
                let idx: Vec<usize> = if batch == n {
                    all.clone()
                } else {
                    (0..batch).map(|_| rng.random_range(0..n)).collect()
                };
                let b = x.select_rows(&idx);
                let assigned = assign_fast(&b, &centroids, &centroid_norms(&centroids));
                let mut sums = Mat::zeros(cfg.k, x.ncols());
                let mut m = vec![0usize; cfg.k];
                let mut batch_inertia = 0.0;
                for (r, &(j, d)) in assigned.iter().enumerate() {
                    let mut row = sums.row_mut(j);
                    row += b.row(r);
                    m[j] += 1;
                    batch_inertia += d;
                }
                for j in 0..cfg.k {
                    if m[j] == 0 {
                        continue;
                    }
                    let old = counts[j] as f64;
                    counts[j] += m[j];
                    let new = counts[j] as f64;
                    let updated = (centroids.row(j) * old + sums.row(j)) / new;
                    centroids.row_mut(j).copy_from(&updated);
                }
                steps += 1;
                let bi = batch_inertia / batch as f64;
                let e = match ewa {
                    None => bi,
                    Some(prev) => prev * (1.0 - alpha) + bi * alpha,
                };
                ewa = Some(e);
                if let Some(patience) = cfg.max_no_improvement {
                    if e < best {
                        best = e;
                        stale = 0;
                    } else {
                        stale += 1;
                        if stale >= patience {
                            log::debug!("mini-batch k-means converged after {steps} steps");
                            break;
                        }
                    }
                }
            }
            Ok(KMeansModel {
                centroids,
                config: *cfg,
                steps,
                inertia_history: Vec::new(),
            })
        }
    }
}

fn lloyd(x: &Mat, mut centroids: Mat, cfg: &KMeansConfig) -> Result<KMeansModel> {
    let mut history = Vec::new();
    let mut steps = 0;
    let mut prev: Option<Vec<usize>> = None;
    for _ in 0..cfg.max_iters {
        let assigned = assign_exact(x, &centroids);
        history.push(
            assigned
                .iter()
                .enumerate()
                .map(|(r, &j)| sq_dist(x.row(r).iter().copied(), centroids.row(j).iter().copied()))
                .sum(),
        );
        if prev.as_ref() == Some(&assigned) {
            break;
        }
        let mut sums = Mat::zeros(cfg.k, x.ncols());
        let mut m = vec![0usize; cfg.k];
        for (r, &j) in assigned.iter().enumerate() {
            let mut row = sums.row_mut(j);
            row += x.row(r);
            m[j] += 1;
        }
        for j in 0..cfg.k {
            if m[j] > 0 {
                let mean = sums.row(j) / m[j] as f64;
                centroids.row_mut(j).copy_from(&mean);
            }
        }
        steps += 1;
        prev = Some(assigned);
    }
    Ok(KMeansModel {
        centroids,
        config: *cfg,
        steps,
        inertia_history: history,
    })
}

fn nearest(row: impl Iterator<Item = f64> + Clone, centroids: &Mat) -> usize {
    let mut best = (0, f64::MAX);
    for j in 0..centroids.nrows() {
        let d = sq_dist(row.clone(), centroids.row(j).iter().copied());
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

fn assign_exact(x: &Mat, centroids: &Mat) -> Vec<usize> {
    (0..x.nrows())
        .into_par_iter()
        .map(|r| nearest(x.row(r).iter().copied(), centroids))
        .collect()
}

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
pub fn kmeans_assign(model: &KMeansModel, x: &Mat) -> Result<Vec<usize>> {
    if x.ncols() != model.centroids.ncols() {
        return Err(Error::Shape(format!(
            "{} feature columns for {}-dim centroids",
            x.ncols(),
            model.centroids.ncols()
        )));
    }
    Ok(assign_exact(x, &model.centroids))
}

/// Sum of squared distances to the assigned centroids.
pub fn inertia(model: &KMeansModel, x: &Mat) -> Result<f64> {
    let a = kmeans_assign(model, x)?;
    Ok(a.iter()
        .enumerate()
        .map(|(r, &j)| sq_dist(x.row(r).iter().copied(), model.centroids.row(j).iter().copied()))
        .sum())
}

/// Joint counts of cluster IDs (rows) and class labels (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

impl ContingencyTable {
    /// Cluster IDs are compacted in ascending order; class columns follow `num_classes`.
    pub fn new(clusters: &[usize], labels: &[usize], num_classes: usize) -> Result<Self> {
        if clusters.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} cluster IDs for {} labels",
                clusters.len(),
                labels.len()
            )));
        }
        let ids: BTreeMap<usize, usize> = clusters
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, i))
            .collect();
        let mut counts = vec![vec![0; num_classes]; ids.len()];
        for (&c, &l) in clusters.iter().zip(labels) {
            if l >= num_classes {
                return Err(Error::Range(format!("label {l} >= {num_classes}")));
            }
            counts[ids[&c]][l] += 1;
        }
        Ok(Self {
            counts,
            n: clusters.len(),
        })
    }

    pub fn cluster_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn class_totals(&self) -> Vec<usize> {
        let cols = self.counts.first().map_or(0, |r| r.len());
        (0..cols).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Count-based mutual information in nats; empty cells contribute nothing.
    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let a = self.cluster_totals();
        let b = self.class_totals();
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &nij) in row.iter().enumerate() {
                if nij > 0 {
                    let nij = nij as f64;
                    mi += nij / n * (n * nij / (a[i] as f64 * b[j] as f64)).ln();
                }
            }
        }
        mi
    }

    pub fn class_entropy(&self) -> f64 {
        entropy(&self.class_totals(), self.n)
    }
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information between cluster IDs and labels divided by the label entropy.
pub fn normalized_mi(clusters: &[usize], labels: &LabelVector) -> Result<f64> {
    let table = ContingencyTable::new(clusters, labels.labels(), labels.num_classes())?;
    let h = table.class_entropy();
    if !(h > 0.0) {
        return Err(Error::Degenerate(
            "labels contain a single class; entropy is zero".into(),
        ));
    }
    Ok((table.mutual_information() / h).clamp(0.0, 1.0))
}

/// Row indices with at most `per_class` rows per label, picked at random.
pub fn balanced_subsample(labels: &LabelVector, per_class: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.num_classes()];
    for (i, &l) in labels.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut out = Vec::new();
    for mut rows in by_class {
        rows.shuffle(&mut rng);
        rows.truncate(per_class);
        out.extend(rows);
    }
    out.sort_unstable();
    out
}
