use anyhow::Result;
use serde_json::json;

use rprobe::cca::{
    cca_cross_validated_with_grid, cca_fit, cca_summarize, CcaConfig, CvPlan, EPS_DECADES,
};
use rprobe::dataio::LabelVector;
use rprobe::discretize::{balanced_subsample, kmeans_assign, kmeans_fit, normalized_mi, KMeansConfig, KMeansMode};
use rprobe::linprobe::{probe_cross_validated, ProbeConfig, DEFAULT_LR_GRID};
use rprobe::report::{mean_and_spread, ScoreRecord};
use rprobe::simkernels::{linear_cka, procrustes_distance};
use rprobe::Mat;

use super::{config, per_layer, scored};
use crate::args::{CcaArgs, Global, MiArgs, ProbeArgs, SimArgs};
use crate::inputs::{layer_file, read_labels, read_matrix, read_target, resolve_views, sample_sets};
use crate::output::Outcome;

fn check_rows(x: &Mat, n: usize) -> Result<()> {
    if x.nrows() != n {
        return Err(rprobe::Error::Shape(format!("{} feature rows but {n} target rows", x.nrows())).into());
    }
    Ok(())
}

fn cv_plan(g: &Global) -> CvPlan {
    CvPlan {
        repeats: g.sample_sets,
        ..CvPlan::default()
    }
    .with_seed(g.seed)
}

pub fn cca(a: &CcaArgs, g: &Global) -> Result<Outcome> {
    let layers = resolve_views(&a.views, layer_file)?;
    let y = read_target(&a.target, &a.opts)?;
    let grid = if a.eps_grid.is_empty() {
        EPS_DECADES.to_vec()
    } else {
        a.eps_grid.clone()
    };
    let mut cfg = CcaConfig {
        summary: a.summary,
        ..CcaConfig::default()
    };
    if let Some(tau) = a.tau {
        cfg = cfg.with_tau(tau);
    }
    let metric = a.summary.to_string();
    let records = per_layer(&layers, |l| {
        let x = read_matrix(&l.path)?;
        check_rows(&x, y.nrows())?;
        if a.no_cv {
            let cfg = cfg.with_eps(grid[0], grid[0]);
            let scores = sample_sets(x.nrows(), g.sample_sets, g.seed)?
                .iter()
                .map(|idx| {
                    let r = cca_fit(&x.select_rows(idx), &y.select_rows(idx), &cfg)?;
                    Ok(cca_summarize(&r.rho, &r.pwcca_weights, a.summary))
                })
                .collect::<rprobe::Result<Vec<f64>>>()?;
            let (mean, spread) = mean_and_spread(&scores);
            let c = json!({"cv": false, "eps": [grid[0], grid[0]], "tau": a.tau, "set_scores": scores});
            Ok(ScoreRecord::new(l.layer, metric.clone(), mean, spread).with_config(config(g, c)))
        } else {
            let o = cca_cross_validated_with_grid(&x, &y, &cfg, &cv_plan(g), &grid)?;
            let c = json!({
                "cv": true,
                "eps_grid": grid,
                "tau": a.tau,
                "selected_eps": o.selected_eps,
                "set_scores": o.round_scores,
            });
            Ok(ScoreRecord::new(l.layer, metric.clone(), o.mean, o.spread).with_config(config(g, c)))
        }
    })?;
    Ok(scored(&metric, records))
}

fn per_set(
    a: &SimArgs,
    g: &Global,
    metric: &str,
    f: impl Fn(&Mat, &Mat) -> rprobe::Result<f64> + Sync,
) -> Result<Outcome> {
    let layers = resolve_views(&a.views, layer_file)?;
    let y = read_target(&a.target, &a.opts)?;
    let records = per_layer(&layers, |l| {
        let x = read_matrix(&l.path)?;
        check_rows(&x, y.nrows())?;
        let scores = sample_sets(x.nrows(), g.sample_sets, g.seed)?
            .iter()
            .map(|idx| f(&x.select_rows(idx), &y.select_rows(idx)))
            .collect::<rprobe::Result<Vec<f64>>>()?;
        let (mean, spread) = mean_and_spread(&scores);
        Ok(ScoreRecord::new(l.layer, metric, mean, spread)
            .with_config(config(g, json!({"set_scores": scores}))))
    })?;
    Ok(scored(metric, records))
}

pub fn cka(a: &SimArgs, g: &Global) -> Result<Outcome> {
    per_set(a, g, "cka", linear_cka)
}

pub fn procrustes(a: &SimArgs, g: &Global) -> Result<Outcome> {
    per_set(a, g, "procrustes", |x, y| Ok(procrustes_distance(x, y)?.distance))
}

pub fn mi(a: &MiArgs, g: &Global) -> Result<Outcome> {
    let layers = resolve_views(&a.views, layer_file)?;
    let labels = read_labels(&a.labels, a.vocab.as_deref())?;
    let per_class = (!a.no_balance).then(|| {
        a.per_class.unwrap_or_else(|| {
            let counts = labels.class_counts();
            counts.into_iter().filter(|&c| c > 0).min().unwrap_or(0)
        })
    });
    let pool: Vec<usize> = match per_class {
        Some(c) => balanced_subsample(&labels, c, g.seed),
        None => (0..labels.len()).collect(),
    };
    let sets: Vec<Vec<usize>> = sample_sets(pool.len(), g.sample_sets, g.seed)?
        .into_iter()
        .map(|s| s.into_iter().map(|i| pool[i]).collect())
        .collect();
    let mode = if a.full_batch {
        KMeansMode::FullBatch
    } else {
        KMeansMode::MiniBatch
    };
    let records = per_layer(&layers, |l| {
        let x = read_matrix(&l.path)?;
        check_rows(&x, labels.len())?;
        let scores = sets
            .iter()
            .enumerate()
            .map(|(s, set)| {
                // First half fits the clusters, second half is scored.
                let (fit, eval) = set.split_at(set.len() / 2);
                let cfg = KMeansConfig {
                    batch_size: a.batch_size,
                    max_iters: a.max_iters,
                    mode,
                    ..KMeansConfig::new(a.k, g.seed.wrapping_add(s as u64))
                };
                let model = kmeans_fit(&x.select_rows(fit), &cfg)?;
                let clusters = kmeans_assign(&model, &x.select_rows(eval))?;
                normalized_mi(&clusters, &labels.select(eval))
            })
            .collect::<rprobe::Result<Vec<f64>>>()?;
        let (mean, spread) = mean_and_spread(&scores);
        let c = json!({
            "k": a.k,
            "batch_size": a.batch_size,
            "max_iters": a.max_iters,
            "mode": mode,
            "per_class": per_class,
            "set_scores": scores,
        });
        Ok(ScoreRecord::new(l.layer, "mi", mean, spread).with_config(config(g, c)))
    })?;
    Ok(scored("mi", records))
}

pub fn linprobe(a: &ProbeArgs, g: &Global) -> Result<Outcome> {
    let layers = resolve_views(&a.views, layer_file)?;
    let labels: LabelVector = read_labels(&a.labels, a.vocab.as_deref())?;
    let cfg = ProbeConfig {
        lr_grid: if a.lr_grid.is_empty() {
            DEFAULT_LR_GRID.to_vec()
        } else {
            a.lr_grid.clone()
        },
        max_epochs: a.max_epochs,
        patience: a.patience,
        batch_size: (a.batch_size > 0).then_some(a.batch_size),
        seed: g.seed,
        ..ProbeConfig::default()
    };
    let records = per_layer(&layers, |l| {
        let x = read_matrix(&l.path)?;
        check_rows(&x, labels.len())?;
        let o = probe_cross_validated(&x, &labels, &cfg, &cv_plan(g))?;
        let c = json!({"probe": cfg, "set_scores": o.round_scores});
        Ok(ScoreRecord::new(l.layer, "linprobe-accuracy", o.mean, o.spread).with_config(config(g, c)))
    })?;
    Ok(scored("linprobe-accuracy", records))
}
