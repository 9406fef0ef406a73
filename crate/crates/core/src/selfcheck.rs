//! Compact property suite exercising every module on seeded synthetic data.
//! The JSON report is byte-identical for a given seed regardless of the
//! number of worker threads.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cca::{cca_fit, CcaConfig, CcaSummary};
use crate::dataio::{AwdPairRow, LabelVector};
use crate::discretize::{kmeans_assign, kmeans_fit, normalized_mi, KMeansConfig};
use crate::freetasks::{
    average_precision, awd_pool_score, cosine_cost_matrix, detect_word_boundaries, dtw_align,
    segmentation_counts, AwdConfig, BoundaryConfig, DtwNorm, Matching, SegCounts,
};
use crate::linalg::Mat;
use crate::linprobe::{gradient_check, ProbeModel};
use crate::simkernels::{linear_cka, procrustes_distance, procrustes_rotation};
use crate::slueval::{label_f1, ner_micro_f1, nel_word_f1, EntitySpan, EntityTuple, WordF1Utterance};
use crate::spanpool::PoolMode;
use crate::synth::{gaussian, piecewise_constant, random_invertible, random_labels, random_orthogonal, rng};
use crate::trends::{pearson, spearman};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfcheckReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SelfcheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn push(&mut self, name: &str, value: f64, passed: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            value,
            passed,
        });
    }
}

fn dtw_paths(cost: &Mat) -> (f64, usize) {
    fn walk(c: &Mat, i: usize, j: usize, acc: f64, len: usize, best: &mut (f64, usize)) {
        let (acc, len) = (acc + c[(i, j)], len + 1);
        let (n, m) = c.shape();
        if i + 1 == n && j + 1 == m {
            if acc < best.0 || (acc == best.0 && len < best.1) {
                *best = (acc, len);
            }
            return;
        }
        if i + 1 < n {
            walk(c, i + 1, j, acc, len, best);
        }
        if j + 1 < m {
            walk(c, i, j + 1, acc, len, best);
        }
        if i + 1 < n && j + 1 < m {
            walk(c, i + 1, j + 1, acc, len, best);
        }
    }
    let mut best = (f64::INFINITY, usize::MAX);
    walk(cost, 0, 0, 0.0, 0, &mut best);
    best
}

fn ap_thresholds(scores: &[f64], pos: &[bool]) -> f64 {
    let mut th = scores.to_vec();
    th.sort_by(|a, b| b.total_cmp(a));
    th.dedup();
    let npos = pos.iter().filter(|&&p| p).count() as f64;
    let (mut prev, mut ap) = (0usize, 0.0);
    for t in th {
        let tp = scores.iter().zip(pos).filter(|(&s, &p)| p && s >= t).count();
        let n = scores.iter().filter(|&&s| s >= t).count();
        if tp > prev {
            ap += ((tp - prev) as f64 / npos) * (tp as f64 / n as f64);
        }
        prev = tp;
    }
    ap
}

/// Runs the suite on the current rayon pool.
pub fn run_selfcheck(seed: u64) -> Result<SelfcheckReport> {
    let mut s = Suite { checks: Vec::new() };
    let cfg = CcaConfig::default().with_eps(1e-8, 1e-8);

    // CCA family.
    let x = gaussian(300, 6, seed);
    let mut y = &x * random_invertible(6, seed + 1);
    y.add_scalar_mut(2.5);
    let r = cca_fit(&x, &y, &cfg)?;
    let mean = r.summary(CcaSummary::Mean);
    s.push("cca_affine_mean", mean, mean >= 0.999);

    let noisy = &x * random_invertible(6, seed + 2) + gaussian(300, 6, seed + 3) * 2.0;
    let vanilla = cca_fit(&x, &noisy, &cfg)?.summary(CcaSummary::Mean);
    let sv = cca_fit(&x, &noisy, &cfg.with_tau(1.0))?.summary(CcaSummary::Mean);
    s.push("svcca_tau1_gap", (sv - vanilla).abs(), (sv - vanilla).abs() < 1e-8);

    let z = gaussian(300, 4, seed + 4);
    let r = cca_fit(&x, &(&x.columns(0, 4) + z), &cfg)?;
    let wsum: f64 = r.pwcca_weights.iter().sum();
    s.push("pwcca_weight_sum_gap", (wsum - 1.0).abs(), (wsum - 1.0).abs() < 1e-9);
    let pw = r.summary(CcaSummary::Pwcca);
    s.push("pwcca_below_top", pw, pw <= r.rho[0] + 1e-12);

    // Similarity kernels.
    let q = random_orthogonal(6, seed + 5);
    let cka = linear_cka(&x, &(&x * &q * 3.0))?;
    s.push("cka_rotation_scale_gap", (cka - 1.0).abs(), (cka - 1.0).abs() < 1e-9);
    let other = gaussian(300, 5, seed + 6);
    let op = procrustes_distance(&x, &other)?;
    let (rot, xn, yn) = procrustes_rotation(&x, &other)?;
    let resid = (&yn - &xn * rot).norm_squared();
    s.push("procrustes_closed_form_gap", (op.distance - resid).abs(), (op.distance - resid).abs() < 1e-8);
    s.push("procrustes_distance", op.distance, (0.0..=2.0 + 1e-6).contains(&op.distance));

    // Discretization and MI.
    let labels = random_labels(32, 4, seed + 7);
    let lv = LabelVector::new(labels.clone(), 4)?;
    s.push("mi_perfect", normalized_mi(&labels, &lv)?, (normalized_mi(&labels, &lv)? - 1.0).abs() < 1e-12);
    let pts = gaussian(32, 3, seed + 8);
    let model = kmeans_fit(&pts, &KMeansConfig::new(32, seed))?;
    let mi = normalized_mi(&kmeans_assign(&model, &pts)?, &lv)?;
    s.push("mi_saturation", mi, (mi - 1.0).abs() < 1e-12);
    let blobs = gaussian(400, 3, seed + 9);
    let blob_labels = random_labels(400, 5, seed + 10);
    let model = kmeans_fit(&blobs, &KMeansConfig::new(8, seed))?;
    let mi = normalized_mi(&kmeans_assign(&model, &blobs)?, &LabelVector::new(blob_labels, 5)?)?;
    s.push("mi_random_bounds", mi, (0.0..=1.0).contains(&mi));

    // Probe gradients.
    let mut probe = ProbeModel::zeros(5, 3);
    probe.w = gaussian(5, 3, seed + 11) * 0.5;
    let err = gradient_check(&probe, &gaussian(16, 5, seed + 12), &random_labels(16, 3, seed + 13))?;
    s.push("probe_gradient_rel_err", err, err < 1e-4);

    // DTW and AP oracles.
    let mut dtw_ok = true;
    for n in 1..=5 {
        for m in 1..=5 {
            let c = cosine_cost_matrix(&gaussian(n, 3, seed + 20 + n as u64), &gaussian(m, 3, seed + 40 + m as u64))?;
            let a = dtw_align(&c, DtwNorm::PathLength)?;
            dtw_ok &= (a.total, a.path_len) == dtw_paths(&c);
        }
    }
    s.push("dtw_brute_force", f64::from(u8::from(dtw_ok)), dtw_ok);
    let mut r = rng(seed + 60);
    let mut ap_ok = true;
    let mut ap_sum = 0.0;
    for _ in 0..20 {
        let n = r.random_range(2..=20);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..5u8)) / 4.0).collect();
        let mut pos: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        pos[0] = true;
        pos[1] = false;
        let ap = average_precision(&scores, &pos)?;
        ap_ok &= ap == ap_thresholds(&scores, &pos);
        ap_sum += ap;
    }
    s.push("ap_threshold_oracle", ap_sum, ap_ok);

    // Word discrimination on identical-segment positives.
    let mut feats = BTreeMap::new();
    feats.insert("u".to_string(), gaussian(120, 4, seed + 61));
    let pair = |a: f64, wa: &str, b: f64, wb: &str| AwdPairRow {
        word_a: wa.into(),
        utt_a: "u".into(),
        start_a: a,
        end_a: a + 0.6,
        word_b: wb.into(),
        utt_b: "u".into(),
        start_b: b,
        end_b: b + 0.6,
    };
    let pairs = vec![pair(0.0, "x", 0.0, "x"), pair(0.0, "x", 1.0, "y"), pair(1.5, "z", 1.5, "z"), pair(0.5, "y", 1.6, "w")];
    let awd = awd_pool_score(&pairs, &feats, PoolMode::Mean, &AwdConfig::default())?;
    s.push("awd_identical_first", awd.average_precision, awd.average_precision == 1.0);

    // Word segmentation on piecewise-constant utterances.
    let mut counts = SegCounts::default();
    let mut r = rng(seed + 70);
    let bcfg = BoundaryConfig {
        smooth_window: 1,
        prominence: 0.05,
        ..Default::default()
    };
    for u in 0..10 {
        let lengths: Vec<usize> = (0..r.random_range(2..6)).map(|_| r.random_range(5..15)).collect();
        let (frames, bounds) = piecewise_constant(&lengths, 8, seed + 100 + u);
        let reference: Vec<f64> = bounds.iter().map(|&b| b as f64 * 0.02).collect();
        let hyp = detect_word_boundaries(&frames, &bcfg)?;
        counts.add(segmentation_counts(&hyp, &reference, 0.02, Matching::Greedy)?);
    }
    let f1 = counts.scores().f1;
    s.push("wordseg_synthetic_f1", f1, f1 == 1.0);

    // Trend correlations.
    let layers: Vec<f64> = (0..13).map(f64::from).collect();
    let curve: Vec<f64> = layers.iter().map(|l| (l * 0.3).exp()).collect();
    let linear: Vec<f64> = layers.iter().map(|l| 1.0 - 0.5 * l).collect();
    let sp = spearman(&layers, &curve)?;
    let pe = pearson(&layers, &linear)?;
    s.push("spearman_monotone", sp, sp == 1.0);
    s.push("pearson_linear", pe, pe == -1.0);

    // SLU scoring.
    let mut r = rng(seed + 80);
    let mut ok = true;
    for _ in 0..20 {
        let sent = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<EntityTuple> {
            (0..r.random_range(0..4))
                .map(|_| EntityTuple::new(&format!("w{}", r.random_range(0..3)), &format!("T{}", r.random_range(0..2))))
                .collect()
        };
        let h: Vec<Vec<EntityTuple>> = (0..3).map(|_| sent(&mut r)).collect();
        let g: Vec<Vec<EntityTuple>> = (0..3).map(|_| sent(&mut r)).collect();
        ok &= ner_micro_f1(&h, &g).f1 <= label_f1(&h, &g).f1;
        let spans = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<EntitySpan> {
            (0..r.random_range(1..4))
                .map(|_| {
                    let st = f64::from(r.random_range(0..50u32)) * 0.02;
                    EntitySpan::new("X", st, st + f64::from(r.random_range(1..20u32)) * 0.02).expect("positive span")
                })
                .collect()
        };
        let ents = spans(&mut r);
        let u = [WordF1Utterance {
            hyp: spans(&mut r),
            ref_words: ents.iter().map(|e| (e.start, e.end)).collect(),
            ref_entities: ents,
        }];
        let f: Vec<f64> = [0.5, 0.8, 1.0]
            .iter()
            .map(|&rho| nel_word_f1(&u, rho).map(|x| x.0.f1))
            .collect::<Result<_>>()?;
        ok &= f[0] >= f[1] && f[1] >= f[2];
    }
    s.push("slu_orderings", f64::from(u8::from(ok)), ok);

    Ok(SelfcheckReport {
        seed,
        checks: s.checks,
    })
}

/// Runs the suite on a dedicated pool with `threads` workers.
pub fn run_selfcheck_with_threads(seed: u64, threads: usize) -> Result<SelfcheckReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    pool.install(|| run_selfcheck(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_and_is_thread_invariant() {
        let a = run_selfcheck_with_threads(7, 1).unwrap();
        assert!(a.all_passed(), "{}", a.to_json());
        let b = run_selfcheck_with_threads(7, 4).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
