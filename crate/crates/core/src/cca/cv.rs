use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cca_fit, CcaConfig};
use crate::linalg::Mat;
use crate::{Error, Result};

/// Candidate ridge values, one per decade.
pub const EPS_DECADES: [f64; 6] = [1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10];
/// Candidate (eps_x, eps_y) pairs swept per round.
pub const EPS_CANDIDATES: usize = 3;
/// Replacement pairs drawn after singular fits before giving up.
pub const MAX_EPS_RESAMPLES: usize = 5;

/// Train/dev/test fold layout repeated over several rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub num_splits: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            num_splits: 10,
            train: 8,
            dev: 1,
            test: 1,
            repeats: 3,
            seed: 0,
        }
    }
}

impl CvPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.train + self.dev + self.test != self.num_splits || self.train == 0 {
            return Err(Error::Parameter(format!(
                "{}+{}+{} splits do not partition {}",
                self.train, self.dev, self.test, self.num_splits
            )));
        }
        if self.dev == 0 || self.test == 0 || self.repeats == 0 {
            return Err(Error::Parameter("dev, test and repeats must be positive".into()));
        }
        if self.repeats * (self.dev + self.test) > self.num_splits {
            return Err(Error::Parameter(format!(
                "{} rounds cannot use disjoint dev/test folds out of {}",
                self.repeats, self.num_splits
            )));
        }
        Ok(())
    }

    /// Shuffled partition of `0..n` into `num_splits` folds.
    pub fn folds(&self, n: usize) -> Vec<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        (0..self.num_splits)
            .map(|f| perm[f * n / self.num_splits..(f + 1) * n / self.num_splits].to_vec())
            .collect()
    }

    /// (train, dev, test) fold indices for `round`; dev and test folds never repeat across rounds.
    pub fn round_folds(&self, round: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let base = round * (self.dev + self.test);
        let test: Vec<usize> = (base..base + self.test).collect();
        let dev: Vec<usize> = (base + self.test..base + self.test + self.dev).collect();
        let train = (0..self.num_splits)
            .filter(|f| !test.contains(f) && !dev.contains(f))
            .collect();
        (train, dev, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub mean: f64,
    pub round_scores: Vec<f64>,
    /// max - min over rounds.
    pub spread: f64,
    /// (eps_x, eps_y) picked on the dev fold of each round.
    pub selected_eps: Vec<(f64, f64)>,
}

fn gather(folds: &[Vec<usize>], pick: &[usize]) -> Vec<usize> {
    pick.iter().flat_map(|&f| folds[f].iter().copied()).collect()
}

fn rows(m: &Mat, idx: &[usize]) -> Mat {
    m.select_rows(idx)
}

fn draw_distinct(rng: &mut ChaCha8Rng, grid: &[f64], k: usize) -> Vec<f64> {
    let mut d = grid.to_vec();
    d.shuffle(rng);
    d.truncate(k);
    d
}

/// Held-out CCA score: per round, projections are fit on the train folds for
/// each candidate ridge pair, the pair with the best dev-fold score is kept,
/// and its test-fold score is reported.
pub fn cca_cross_validated(x: &Mat, y: &Mat, cfg: &CcaConfig, plan: &CvPlan) -> Result<CvOutcome> {
    cca_cross_validated_with_grid(x, y, cfg, plan, &EPS_DECADES)
}

/// As `cca_cross_validated`, drawing ridge candidates from `eps_grid`.
pub fn cca_cross_validated_with_grid(
    x: &Mat,
    y: &Mat,
    cfg: &CcaConfig,
    plan: &CvPlan,
    eps_grid: &[f64],
) -> Result<CvOutcome> {
    plan.validate()?;
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Parameter("epsilon grid must be non-empty and positive".into()));
    }
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Shape(format!("views have {} and {} rows", n, y.nrows())));
    }
    let min_dim = x.ncols().min(y.ncols());
    if n < 10 * min_dim {
        return Err(Error::Shape(format!(
            "{n} rows; cross-validation needs at least {}",
            10 * min_dim
        )));
    }
    let folds = plan.folds(n);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut round_scores = Vec::with_capacity(plan.repeats);
    let mut selected_eps = Vec::with_capacity(plan.repeats);

    for round in 0..plan.repeats {
        let (tr, dv, te) = plan.round_folds(round);
        let (tr, dv, te) = (gather(&folds, &tr), gather(&folds, &dv), gather(&folds, &te));
        let (xtr, ytr) = (rows(x, &tr), rows(y, &tr));
        let (xdv, ydv) = (rows(x, &dv), rows(y, &dv));

        let k = EPS_CANDIDATES.min(eps_grid.len());
        let mut pairs: Vec<(f64, f64)> = draw_distinct(&mut rng, eps_grid, k)
            .into_iter()
            .zip(draw_distinct(&mut rng, eps_grid, k))
            .collect();
        let mut tried: HashSet<(u64, u64)> = pairs
            .iter()
            .map(|&(a, b)| (a.to_bits(), b.to_bits()))
            .collect();
        let mut resamples = 0;
        let mut best: Option<(f64, super::CcaResult)> = None;
        let mut i = 0;
        while i < pairs.len() {
            let (ex, ey) = pairs[i];
            i += 1;
            match cca_fit(&xtr, &ytr, &cfg.with_eps(ex, ey)) {
                Ok(fit) => {
                    let score = fit.heldout_score(&xdv, &ydv, cfg.summary)?;
                    if best.as_ref().is_none_or(|(s, _)| score > *s) {
                        best = Some((score, fit));
                    }
                }
                Err(err @ Error::ResampleEpsilon { .. }) => {
                    resamples += 1;
                    if resamples > MAX_EPS_RESAMPLES || tried.len() == eps_grid.len().pow(2) {
                        if best.is_some() {
                            continue;
                        }
                        return Err(err);
                    }
                    log::debug!("singular fit at ({ex:e}, {ey:e}); drawing another pair");
                    loop {
                        let p = (
                            eps_grid[rng.random_range(0..eps_grid.len())],
                            eps_grid[rng.random_range(0..eps_grid.len())],
                        );
                        if tried.insert((p.0.to_bits(), p.1.to_bits())) {
                            pairs.push(p);
                            break;
                        }
                    }
                }
                Err(e) => return Err(e),
            }
        }
        let Some((_, fit)) = best else {
            return Err(Error::ResampleEpsilon {
                eps_x: pairs[0].0,
                eps_y: pairs[0].1,
            });
        };
        let score = fit.heldout_score(&rows(x, &te), &rows(y, &te), cfg.summary)?;
        round_scores.push(score);
        selected_eps.push((fit.eps_x, fit.eps_y));
    }

    let mean = round_scores.iter().sum::<f64>() / round_scores.len() as f64;
    let max = round_scores.iter().copied().fold(f64::MIN, f64::max);
    let min = round_scores.iter().copied().fold(f64::MAX, f64::min);
    Ok(CvOutcome {
        mean,
        round_scores,
        spread: max - min,
        selected_eps,
    })
}
