//! Softmax linear probe trained with Adam and scored by accuracy.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cca::{CvOutcome, CvPlan};
use crate::dataio::{FeatureMatrix, LabelVector};
use crate::linalg::Mat;
use crate::{Error, Result};

pub const DEFAULT_LR_GRID: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub lr_grid: Vec<f64>,
    pub optimizer: Optimizer,
    pub max_epochs: usize,
    /// Epochs without dev-loss improvement before stopping.
    pub patience: usize,
    /// `None` trains on the full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            optimizer: Optimizer::default(),
            max_epochs: 200,
            patience: 10,
            batch_size: Some(256),
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn full_batch(mut self) -> Self {
        self.batch_size = None;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetadata {
    pub num_classes: usize,
    pub dim: usize,
    pub lr: f64,
    pub bias: Vec<f64>,
    pub train_loss: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProbeModel {
    /// d x K weights.
    pub w: Mat,
    pub b: DVector<f64>,
    pub lr: f64,
    /// Mean training loss after each epoch.
    pub train_loss: Vec<f64>,
}

impl ProbeModel {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        Self {
            w: Mat::zeros(dim, classes),
            b: DVector::zeros(classes),
            lr: 0.0,
            train_loss: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.b.len()
    }

    pub fn scores(&self, x: &Mat) -> Mat {
        let mut s = x * &self.w;
        for mut row in s.row_iter_mut() {
            row += self.b.transpose();
        }
        s
    }

    /// Argmax class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &Mat) -> Vec<usize> {
        let s = self.scores(x);
        s.row_iter()
            .map(|r| {
                let mut best = 0;
                for j in 1..r.len() {
                    if r[j] > r[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Weights as a feature file, bias and training log as JSON.
    pub fn save(&self, weights: &std::path::Path, meta: &std::path::Path) -> Result<()> {
        crate::dataio::write_feature_matrix(weights, &FeatureMatrix::from_dmatrix(&self.w)?)?;
        let m = ProbeMetadata {
            num_classes: self.num_classes(),
            dim: self.w.nrows(),
            lr: self.lr,
            bias: self.b.iter().copied().collect(),
            train_loss: self.train_loss.clone(),
        };
        let text = serde_json::to_string_pretty(&m).expect("metadata serializes");
        std::fs::write(meta, text).map_err(|e| Error::io(meta, e))
    }

    pub fn load(weights: &std::path::Path, meta: &std::path::Path) -> Result<Self> {
        let w = crate::dataio::read_feature_matrix(weights)?.to_dmatrix();
        let text = std::fs::read_to_string(meta).map_err(|e| Error::io(meta, e))?;
        let m: ProbeMetadata = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if m.bias.len() != w.ncols() || m.dim != w.nrows() {
            return Err(Error::Shape("probe metadata does not match weights".into()));
        }
        Ok(Self {
            w,
            b: DVector::from_vec(m.bias),
            lr: m.lr,
            train_loss: m.train_loss,
        })
    }
}

/// Mean softmax cross-entropy and its gradients with respect to W and b.
pub fn loss_and_grad(model: &ProbeModel, x: &Mat, labels: &[usize]) -> (f64, Mat, DVector<f64>) {
    let n = x.nrows() as f64;
    let mut p = model.scores(x);
    let mut loss = 0.0;
    for (r, mut row) in p.row_iter_mut().enumerate() {
        let max = row.max();
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row /= z;
        loss -= row[labels[r]].ln();
        row[labels[r]] -= 1.0;
    }
    let gw = x.transpose() * &p / n;
    let gb = DVector::from_iterator(p.ncols(), p.column_iter().map(|c| c.sum() / n));
    (loss / n, gw, gb)
}

pub fn mean_loss(model: &ProbeModel, x: &Mat, labels: &[usize]) -> f64 {
    let s = model.scores(x);
    let mut loss = 0.0;
    for (r, row) in s.row_iter().enumerate() {
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[labels[r]];
    }
    loss / x.nrows() as f64
}

/// Central finite-difference gradient of the mean loss.
pub fn numerical_gradient(
    model: &ProbeModel,
    x: &Mat,
    labels: &[usize],
    h: f64,
) -> (Mat, DVector<f64>) {
    let mut m = model.clone();
    let mut gw = Mat::zeros(m.w.nrows(), m.w.ncols());
    for i in 0..m.w.nrows() {
        for j in 0..m.w.ncols() {
            let orig = m.w[(i, j)];
            m.w[(i, j)] = orig + h;
            let up = mean_loss(&m, x, labels);
            m.w[(i, j)] = orig - h;
            let down = mean_loss(&m, x, labels);
            m.w[(i, j)] = orig;
            gw[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    let mut gb = DVector::zeros(m.b.len());
    for j in 0..m.b.len() {
        let orig = m.b[j];
        m.b[j] = orig + h;
        let up = mean_loss(&m, x, labels);
        m.b[j] = orig - h;
        let down = mean_loss(&m, x, labels);
        m.b[j] = orig;
        gb[j] = (up - down) / (2.0 * h);
    }
    (gw, gb)
}

/// Step size for `gradient_check`.
pub const GRAD_CHECK_STEP: f64 = 1e-5;
const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Largest relative disagreement between analytic and finite-difference gradients.
pub fn gradient_check(model: &ProbeModel, x: &Mat, labels: &[usize]) -> Result<f64> {
    if x.nrows() == 0 || x.nrows() > 32 {
        return Err(Error::Parameter(format!(
            "gradient check expects 1..=32 rows, got {}",
            x.nrows()
        )));
    }
    let (_, aw, ab) = loss_and_grad(model, x, labels);
    let (nw, nb) = numerical_gradient(model, x, labels, GRAD_CHECK_STEP);
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(GRAD_CHECK_FLOOR);
    let w = aw.iter().zip(nw.iter()).map(|(&a, &n)| rel(a, n));
    let b = ab.iter().zip(nb.iter()).map(|(&a, &n)| rel(a, n));
    Ok(w.chain(b).fold(0.0, f64::max))
}

pub fn probe_accuracy(model: &ProbeModel, x: &Mat, labels: &[usize]) -> Result<f64> {
    if x.ncols() != model.w.nrows() || x.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{}x{} features and {} labels for a {}-dim probe",
            x.nrows(),
            x.ncols(),
            labels.len(),
            model.w.nrows()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = model
        .predict(x)
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

struct AdamState {
    mw: Mat,
    vw: Mat,
    mb: DVector<f64>,
    vb: DVector<f64>,
    t: i32,
}

fn step(model: &mut ProbeModel, gw: &Mat, gb: &DVector<f64>, lr: f64, opt: Optimizer, st: &mut AdamState) {
    match opt {
        Optimizer::Sgd => {
            model.w -= gw * lr;
            model.b -= gb * lr;
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            st.t += 1;
            let c1 = 1.0 - beta1.powi(st.t);
            let c2 = 1.0 - beta2.powi(st.t);
            st.mw = &st.mw * beta1 + gw * (1.0 - beta1);
            st.vw = &st.vw * beta2 + gw.component_mul(gw) * (1.0 - beta2);
            st.mb = &st.mb * beta1 + gb * (1.0 - beta1);
            st.vb = &st.vb * beta2 + gb.component_mul(gb) * (1.0 - beta2);
            model.w.zip_zip_apply(&st.mw, &st.vw, |w, m, v| {
                *w -= lr * (m / c1) / ((v / c2).sqrt() + eps)
            });
            model.b.zip_zip_apply(&st.mb, &st.vb, |b, m, v| {
                *b -= lr * (m / c1) / ((v / c2).sqrt() + eps)
            });
        }
    }
}

/// Trains at one learning rate with early stopping on dev loss; returns the
/// best-dev-loss parameters or `None` if the loss diverged.
fn train_at(
    x: &Mat,
    y: &[usize],
    dev_x: &Mat,
    dev_y: &[usize],
    k: usize,
    lr: f64,
    cfg: &ProbeConfig,
) -> Option<(ProbeModel, f64)> {
    let mut model = ProbeModel::zeros(x.ncols(), k);
    model.lr = lr;
    let mut st = AdamState {
        mw: Mat::zeros(x.ncols(), k),
        vw: Mat::zeros(x.ncols(), k),
        mb: DVector::zeros(k),
        vb: DVector::zeros(k),
        t: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut best: Option<(ProbeModel, f64)> = None;
    let mut stale = 0;
    for _ in 0..cfg.max_epochs {
        match cfg.batch_size {
            None => {
                let (_, gw, gb) = loss_and_grad(&model, x, y);
                step(&mut model, &gw, &gb, lr, cfg.optimizer, &mut st);
            }
            Some(bs) => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(bs.max(1)) {
                    let bx = x.select_rows(chunk);
                    let by: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                    let (_, gw, gb) = loss_and_grad(&model, &bx, &by);
                    step(&mut model, &gw, &gb, lr, cfg.optimizer, &mut st);
                }
            }
        }
        let train = mean_loss(&model, x, y);
        let dev = mean_loss(&model, dev_x, dev_y);
        if !train.is_finite() || !dev.is_finite() {
            return None;
        }
        model.train_loss.push(train);
        if best.as_ref().is_none_or(|(_, b)| dev < *b) {
            best = Some((model.clone(), dev));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    best.map(|(mut m, d)| {
        m.train_loss = model.train_loss;
        (m, d)
    })
}

/// Trains one probe per learning rate and keeps the one with the best dev
/// accuracy (ties: lower dev loss, then grid order).
pub fn probe_train(
    x: &Mat,
    labels: &LabelVector,
    dev_x: &Mat,
    dev_labels: &LabelVector,
    cfg: &ProbeConfig,
) -> Result<ProbeModel> {
    if x.nrows() != labels.len() || dev_x.nrows() != dev_labels.len() {
        return Err(Error::Shape("feature rows and labels differ".into()));
    }
    if x.ncols() != dev_x.ncols() {
        return Err(Error::Shape("train and dev feature widths differ".into()));
    }
    if dev_x.nrows() == 0 {
        return Err(Error::Shape("empty dev split".into()));
    }
    if cfg.lr_grid.is_empty() {
        return Err(Error::Parameter("empty learning-rate grid".into()));
    }
    let k = labels.num_classes();
    let mut best: Option<(ProbeModel, f64, f64)> = None;
    for &lr in &cfg.lr_grid {
        let Some((model, dev_loss)) =
            train_at(x, labels.labels(), dev_x, dev_labels.labels(), k, lr, cfg)
        else {
            log::warn!("probe diverged at lr={lr}");
            continue;
        };
        let acc = probe_accuracy(&model, dev_x, dev_labels.labels())?;
        let better = match &best {
            None => true,
            Some((_, a, l)) => acc > *a || (acc == *a && dev_loss < *l),
        };
        if better {
            best = Some((model, acc, dev_loss));
        }
    }
    best.map(|(m, _, _)| m)
        .ok_or_else(|| Error::Training("loss diverged at every learning rate".into()))
}

/// Test accuracy over the rounds of `plan`, training on train folds and
/// selecting the learning rate on the dev fold.
pub fn probe_cross_validated(
    x: &Mat,
    labels: &LabelVector,
    cfg: &ProbeConfig,
    plan: &CvPlan,
) -> Result<CvOutcome> {
    if x.nrows() != labels.len() {
        return Err(Error::Shape("feature rows and labels differ".into()));
    }
    let folds = plan.folds(x.nrows());
    let mut round_scores = Vec::new();
    for round in 0..plan.repeats {
        let (tr, dv, te) = plan.round_folds(round);
        let pick = |fs: &[usize]| -> Vec<usize> { fs.iter().flat_map(|&f| folds[f].clone()).collect() };
        let (tr, dv, te) = (pick(&tr), pick(&dv), pick(&te));
        let model = probe_train(
            &x.select_rows(&tr),
            &labels.select(&tr),
            &x.select_rows(&dv),
            &labels.select(&dv),
            cfg,
        )?;
        round_scores.push(probe_accuracy(&model, &x.select_rows(&te), labels.select(&te).labels())?);
    }
    let mean = round_scores.iter().sum::<f64>() / round_scores.len() as f64;
    let max = round_scores.iter().copied().fold(f64::MIN, f64::max);
    let min = round_scores.iter().copied().fold(f64::MAX, f64::min);
    Ok(CvOutcome {
        mean,
        spread: max - min,
        round_scores,
        selected_eps: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::tests::gaussian;
    use rand::Rng;

    fn random_model(d: usize, k: usize, seed: u64) -> ProbeModel {
        let mut m = ProbeModel::zeros(d, k);
        m.w = gaussian(d, k, seed) * 0.5;
        m.b = DVector::from_iterator(k, gaussian(k, 1, seed + 1).iter().copied());
        m
    }

    fn random_labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0..k)).collect()
    }

    fn lv(v: Vec<usize>, k: usize) -> LabelVector {
        LabelVector::new(v, k).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            let m = random_model(5, 3, seed);
            let x = gaussian(16, 5, seed + 10);
            let y = random_labels(16, 3, seed);
            assert!(gradient_check(&m, &x, &y).unwrap() < 1e-4);
        }
    }

    #[test]
    fn single_sample_gradient() {
        let m = random_model(4, 3, 3);
        let x = gaussian(1, 4, 4);
        let (_, aw, ab) = loss_and_grad(&m, &x, &[2]);
        let (nw, nb) = numerical_gradient(&m, &x, &[2], GRAD_CHECK_STEP);
        for (a, n) in aw.iter().chain(ab.iter()).zip(nw.iter().chain(nb.iter())) {
            assert!((a - n).abs() < 1e-5 * a.abs().max(1.0));
        }
    }

    #[test]
    fn uniform_point_gradients_agree() {
        let m = ProbeModel::zeros(3, 3);
        let x = gaussian(3, 3, 5);
        let y = vec![0, 1, 2];
        let (_, aw, ab) = loss_and_grad(&m, &x, &y);
        let (nw, _) = numerical_gradient(&m, &x, &y, GRAD_CHECK_STEP);
        assert!((aw - nw).amax() < 1e-8);
        assert!(ab.amax() < 1e-15);
    }

    #[test]
    fn accuracy_examples() {
        let m = ProbeModel::zeros(2, 3);
        let x = gaussian(4, 2, 6);
        assert_eq!(probe_accuracy(&m, &x, &[0, 0, 0, 0]).unwrap(), 1.0);
        assert_eq!(probe_accuracy(&m, &x, &[0, 0, 0, 2]).unwrap(), 0.75);
    }

    #[test]
    fn bias_shift_keeps_predictions() {
        let mut m = random_model(4, 5, 7);
        let x = gaussian(50, 4, 8);
        let before = m.predict(&x);
        m.b.add_scalar_mut(3.25);
        assert_eq!(m.predict(&x), before);
    }

    #[test]
    fn relabeling_classes_keeps_accuracy() {
        let m = random_model(3, 4, 9);
        let x = gaussian(40, 3, 10);
        let y = random_labels(40, 4, 11);
        let perm = [2usize, 0, 3, 1];
        let mut pm = m.clone();
        for j in 0..4 {
            pm.w.set_column(perm[j], &m.w.column(j));
            pm.b[perm[j]] = m.b[j];
        }
        let py: Vec<usize> = y.iter().map(|&l| perm[l]).collect();
        assert_eq!(
            probe_accuracy(&m, &x, &y).unwrap(),
            probe_accuracy(&pm, &x, &py).unwrap()
        );
    }

    fn blobs(n: usize, seed: u64) -> (Mat, Vec<usize>) {
        let noise = gaussian(n, 2, seed);
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Mat::from_fn(n, 2, |r, c| noise[(r, c)] * 0.3 + if y[r] == 1 { 3.0 } else { -3.0 });
        (x, y)
    }

    #[test]
    fn separable_blobs() {
        let (x, y) = blobs(200, 12);
        let (dx, dy) = blobs(50, 13);
        let cfg = ProbeConfig::default().full_batch();
        let m = probe_train(&x, &lv(y, 2), &dx, &lv(dy.clone(), 2), &cfg).unwrap();
        assert_eq!(probe_accuracy(&m, &dx, &dy).unwrap(), 1.0);
    }

    #[test]
    fn null_features_are_at_chance() {
        let x = gaussian(2000, 8, 14);
        let y = random_labels(2000, 4, 15);
        let dx = gaussian(500, 8, 16);
        let dy = random_labels(500, 4, 17);
        let m = probe_train(&x, &lv(y, 4), &dx, &lv(dy, 4), &ProbeConfig::default()).unwrap();
        let tx = gaussian(2000, 8, 18);
        let ty = random_labels(2000, 4, 19);
        let acc = probe_accuracy(&m, &tx, &ty).unwrap();
        assert!((acc - 0.25).abs() < 0.1, "{acc}");
    }

    #[test]
    fn duplicated_samples_keep_predictions() {
        let (x, y) = blobs(60, 20);
        let (dx, dy) = blobs(20, 21);
        let cfg = ProbeConfig {
            lr_grid: vec![1e-2],
            ..ProbeConfig::default().full_batch()
        };
        let a = probe_train(&x, &lv(y.clone(), 2), &dx, &lv(dy.clone(), 2), &cfg).unwrap();
        let idx: Vec<usize> = (0..60).flat_map(|i| [i, i]).collect();
        let x2 = x.select_rows(&idx);
        let y2: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
        let b = probe_train(&x2, &lv(y2, 2), &dx, &lv(dy, 2), &cfg).unwrap();
        let probe = gaussian(300, 2, 22) * 4.0;
        assert_eq!(a.predict(&probe), b.predict(&probe));
    }

    #[test]
    fn full_batch_loss_non_increasing() {
        let x = gaussian(100, 4, 23);
        let y = random_labels(100, 3, 24);
        let cfg = ProbeConfig {
            lr_grid: vec![1e-3],
            max_epochs: 100,
            patience: 1000,
            ..ProbeConfig::default().full_batch()
        };
        let m = probe_train(&x, &lv(y.clone(), 3), &x, &lv(y, 3), &cfg).unwrap();
        assert_eq!(m.train_loss.len(), 100);
        for w in m.train_loss.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let x = gaussian(20, 2, 25) * 1e300;
        let y = random_labels(20, 2, 26);
        let cfg = ProbeConfig {
            lr_grid: vec![1e300],
            optimizer: Optimizer::Sgd,
            ..ProbeConfig::default().full_batch()
        };
        assert!(matches!(
            probe_train(&x, &lv(y.clone(), 2), &x, &lv(y, 2), &cfg),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let m = random_model(3, 2, 27);
        let dir = tempfile::tempdir().unwrap();
        let (w, j) = (dir.path().join("w.rpfm"), dir.path().join("w.json"));
        m.save(&w, &j).unwrap();
        let back = ProbeModel::load(&w, &j).unwrap();
        let x = gaussian(30, 3, 28);
        assert_eq!(back.predict(&x), m.predict(&x));
    }

    #[test]
    fn cross_validated_probe() {
        let (x, y) = blobs(300, 29);
        let cfg = ProbeConfig::default().full_batch();
        let out = probe_cross_validated(&x, &lv(y, 2), &cfg, &CvPlan::default()).unwrap();
        assert_eq!(out.round_scores.len(), 3);
        assert!(out.mean > 0.99);
    }
}
