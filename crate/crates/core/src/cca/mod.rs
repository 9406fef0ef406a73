//! Regularized canonical correlation analysis and its summaries: vanilla
//! mean, top-k prefixes, top-one, SVCCA and PWCCA, plus the cross-validation
//! harness used to score held-out data.

mod cv;
mod svcca;

pub use cv::{cca_cross_validated, cca_cross_validated_with_grid, CvOutcome, CvPlan, EPS_DECADES};
pub use svcca::{svcca_project, SvdReduction};

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{center_columns, cross, orth, subtract_means, Mat};
use crate::{Error, Result};

/// Correlations above 1 by more than this are reported as ill-conditioned.
pub const RHO_EXCURSION_TOL: f64 = 1e-6;

/// Scalar reduction of the canonical correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CcaSummary {
    Mean,
    /// Mean of the shortest prefix holding at least this share of the total mass.
    Top(f64),
    TopOne,
    Pwcca,
}

impl CcaSummary {
    pub const ALL: [CcaSummary; 6] = [
        CcaSummary::Mean,
        CcaSummary::Top(0.9),
        CcaSummary::Top(0.7),
        CcaSummary::Top(0.5),
        CcaSummary::TopOne,
        CcaSummary::Pwcca,
    ];
}

impl fmt::Display for CcaSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CcaSummary::Mean => write!(f, "mean"),
            CcaSummary::Top(k) => write!(f, "top-{k}"),
            CcaSummary::TopOne => write!(f, "top-one"),
            CcaSummary::Pwcca => write!(f, "pwcca"),
        }
    }
}

impl FromStr for CcaSummary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(CcaSummary::Mean),
            "top-one" => Ok(CcaSummary::TopOne),
            "pwcca" => Ok(CcaSummary::Pwcca),
            _ => {
                let k = s
                    .strip_prefix("top-")
                    .and_then(|k| k.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parameter(format!("unknown CCA summary {s:?}")))?;
                if !(k > 0.0 && k <= 1.0) {
                    return Err(Error::Parameter(format!("top-k fraction {k} not in (0,1]")));
                }
                Ok(CcaSummary::Top(k))
            }
        }
    }
}

impl From<CcaSummary> for String {
    fn from(s: CcaSummary) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for CcaSummary {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcaConfig {
    pub eps_x: f64,
    pub eps_y: f64,
    /// SVD variance-retention threshold for X; `None` skips the reduction.
    pub sv_tau_x: Option<f64>,
    pub sv_tau_y: Option<f64>,
    pub summary: CcaSummary,
}

impl Default for CcaConfig {
    fn default() -> Self {
        Self {
            eps_x: 1e-8,
            eps_y: 1e-8,
            sv_tau_x: None,
            sv_tau_y: None,
            summary: CcaSummary::Pwcca,
        }
    }
}

impl CcaConfig {
    pub fn with_eps(mut self, eps_x: f64, eps_y: f64) -> Self {
        self.eps_x = eps_x;
        self.eps_y = eps_y;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.sv_tau_x = Some(tau);
        self.sv_tau_y = Some(tau);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps_x > 0.0 && self.eps_y > 0.0) {
            return Err(Error::Parameter("ridge epsilons must be positive".into()));
        }
        for tau in [self.sv_tau_x, self.sv_tau_y].into_iter().flatten() {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::Parameter(format!("tau {tau} not in (0,1]")));
            }
        }
        Ok(())
    }
}

/// All six scalar reductions of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcaSummaries {
    pub mean: f64,
    pub top_09: f64,
    pub top_07: f64,
    pub top_05: f64,
    pub top_one: f64,
    pub pwcca: f64,
}

#[derive(Debug, Clone)]
pub struct CcaResult {
    /// Canonical correlations, non-increasing, clamped to [0, 1].
    pub rho: Vec<f64>,
    /// Canonical directions for the (possibly SVD-reduced) X view, one per column.
    pub proj_a: Mat,
    pub proj_b: Mat,
    pub pwcca_weights: Vec<f64>,
    pub summaries: CcaSummaries,
    /// Set when a raw correlation exceeded `1 + RHO_EXCURSION_TOL`.
    pub conditioning_warning: bool,
    pub eps_x: f64,
    pub eps_y: f64,
    mean_x: DVector<f64>,
    mean_y: DVector<f64>,
    reduce_x: Option<SvdReduction>,
    reduce_y: Option<SvdReduction>,
}

impl CcaResult {
    pub fn dims(&self) -> usize {
        self.rho.len()
    }

    pub fn summary(&self, kind: CcaSummary) -> f64 {
        cca_summarize(&self.rho, &self.pwcca_weights, kind)
    }

    /// SVD-retained dimensions of X and Y (full width without reduction).
    pub fn retained_dims(&self) -> (usize, usize) {
        (self.proj_a.nrows(), self.proj_b.nrows())
    }

    /// Canonical variates of new X rows under the fitted centering and projections.
    pub fn transform_x(&self, x: &Mat) -> Mat {
        let c = subtract_means(x, &self.mean_x);
        let c = match &self.reduce_x {
            Some(r) => r.apply(&c),
            None => c,
        };
        c * &self.proj_a
    }

    pub fn transform_y(&self, y: &Mat) -> Mat {
        let c = subtract_means(y, &self.mean_y);
        let c = match &self.reduce_y {
            Some(r) => r.apply(&c),
            None => c,
        };
        c * &self.proj_b
    }

    /// Summary of the per-direction correlations on held-out rows.
    pub fn heldout_score(&self, x: &Mat, y: &Mat, kind: CcaSummary) -> Result<f64> {
        if x.nrows() != y.nrows() || x.nrows() < 2 {
            return Err(Error::Shape(format!(
                "held-out views have {} and {} rows",
                x.nrows(),
                y.nrows()
            )));
        }
        let px = self.transform_x(x);
        let py = self.transform_y(y);
        let mut rho: Vec<f64> = (0..self.dims())
            .map(|i| {
                crate::linalg::correlation(px.column(i).as_slice(), py.column(i).as_slice())
                    .unwrap_or(0.0)
                    .clamp(0.0, 1.0)
            })
            .collect();
        let weights = if kind == CcaSummary::Pwcca {
            let (xc, _) = center_columns(x);
            let (yc, _) = center_columns(y);
            let (view, variates) = if self.proj_a.nrows() <= self.proj_b.nrows() {
                (reduce(&xc, &self.reduce_x), px)
            } else {
                (reduce(&yc, &self.reduce_y), py)
            };
            pwcca_weights(&view, &variates)?
        } else {
            vec![1.0 / rho.len() as f64; rho.len()]
        };
        if kind != CcaSummary::Pwcca {
            rho.sort_by(|a, b| b.total_cmp(a));
        }
        Ok(cca_summarize(&rho, &weights, kind))
    }
}

fn reduce(x: &Mat, r: &Option<SvdReduction>) -> Mat {
    match r {
        Some(r) => r.apply(x),
        None => x.clone(),
    }
}

/// Scalar summary of non-increasing correlations `rho`; `weights` feed PWCCA only.
pub fn cca_summarize(rho: &[f64], weights: &[f64], kind: CcaSummary) -> f64 {
    if rho.is_empty() {
        return 0.0;
    }
    match kind {
        CcaSummary::Mean => rho.iter().sum::<f64>() / rho.len() as f64,
        CcaSummary::Top(k) => {
            let dk = crate::linalg::mass_prefix(rho, k);
            rho[..dk].iter().sum::<f64>() / dk as f64
        }
        CcaSummary::TopOne => rho[0],
        CcaSummary::Pwcca => weights.iter().zip(rho).map(|(a, r)| a * r).sum(),
    }
}

fn summaries(rho: &[f64], weights: &[f64]) -> CcaSummaries {
    CcaSummaries {
        mean: cca_summarize(rho, weights, CcaSummary::Mean),
        top_09: cca_summarize(rho, weights, CcaSummary::Top(0.9)),
        top_07: cca_summarize(rho, weights, CcaSummary::Top(0.7)),
        top_05: cca_summarize(rho, weights, CcaSummary::Top(0.5)),
        top_one: cca_summarize(rho, weights, CcaSummary::TopOne),
        pwcca: cca_summarize(rho, weights, CcaSummary::Pwcca),
    }
}

/// Projection weights: direction i gets the summed absolute inner products
/// of the view's (centered) columns with the i-th vector of an orthonormal
/// basis of the canonical variates, normalized to sum to one.
pub fn pwcca_weights(view: &Mat, variates: &Mat) -> Result<Vec<f64>> {
    if view.nrows() != variates.nrows() {
        return Err(Error::Shape(format!(
            "view has {} rows, variates {}",
            view.nrows(),
            variates.nrows()
        )));
    }
    let h = orth(variates);
    let inner = cross(&h, view);
    let raw: Vec<f64> = inner
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum())
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate("PWCCA weights have zero total mass".into()));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Fits CCA between the rows of `x` and `y` (samples as rows).
///
/// Both views are mean-centered, optionally SVD-reduced, and solved by
/// whitening with the Cholesky factors of the ridged covariances followed by
/// an SVD of the whitened cross-covariance. The singular values are the
/// square roots of the eigenvalues of `Cxx^-1 Cxy Cyy^-1 Cyx`.
pub fn cca_fit(x: &Mat, y: &Mat, cfg: &CcaConfig) -> Result<CcaResult> {
    cfg.validate()?;
    let n = x.nrows();
    if n != y.nrows() {
        return Err(Error::Shape(format!("views have {} and {} rows", n, y.nrows())));
    }
    if n < x.ncols().max(y.ncols()) + 1 {
        return Err(Error::Shape(format!(
            "{n} rows for dims {} and {}; need at least max+1",
            x.ncols(),
            y.ncols()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite input".into()));
    }
    let (xc, mean_x) = center_columns(x);
    let (yc, mean_y) = center_columns(y);
    let reduce_x = cfg.sv_tau_x.map(|t| svcca_project(&xc, t)).transpose()?;
    let reduce_y = cfg.sv_tau_y.map(|t| svcca_project(&yc, t)).transpose()?;
    let xr = reduce_x.as_ref().map(|r| r.projected.clone()).unwrap_or(xc);
    let yr = reduce_y.as_ref().map(|r| r.projected.clone()).unwrap_or(yc);
    if xr.ncols() == 0 || yr.ncols() == 0 {
        return Err(Error::Degenerate("no dimensions left after SVD truncation".into()));
    }

    let scale = 1.0 / (n as f64 - 1.0);
    let mut cxx = cross(&xr, &xr) * scale;
    let mut cyy = cross(&yr, &yr) * scale;
    let cxy = cross(&xr, &yr) * scale;
    for i in 0..cxx.nrows() {
        cxx[(i, i)] += cfg.eps_x;
    }
    for i in 0..cyy.nrows() {
        cyy[(i, i)] += cfg.eps_y;
    }
    let resample = || Error::ResampleEpsilon {
        eps_x: cfg.eps_x,
        eps_y: cfg.eps_y,
    };
    let lx = Cholesky::new(cxx).ok_or_else(resample)?.unpack();
    let ly = Cholesky::new(cyy).ok_or_else(resample)?.unpack();

    // T = Lx^-1 Cxy Ly^-T
    let m1 = lx.solve_lower_triangular(&cxy).ok_or_else(resample)?;
    let t = ly
        .solve_lower_triangular(&m1.transpose())
        .ok_or_else(resample)?
        .transpose();
    if t.iter().any(|v| !v.is_finite()) {
        return Err(resample());
    }
    let svd = t.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Conditioning("SVD of whitened cross-covariance failed".into())),
    };
    let d = xr.ncols().min(yr.ncols());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order.truncate(d);

    let mut conditioning_warning = false;
    let rho: Vec<f64> = order
        .iter()
        .map(|&i| {
            let r = svd.singular_values[i];
            if r > 1.0 + RHO_EXCURSION_TOL {
                conditioning_warning = true;
            }
            r.clamp(0.0, 1.0)
        })
        .collect();
    if conditioning_warning {
        log::warn!(
            "canonical correlation above 1 (eps_x={:e}, eps_y={:e}); clamped",
            cfg.eps_x,
            cfg.eps_y
        );
    }
    let u_d = Mat::from_fn(u.nrows(), d, |r, c| u[(r, order[c])]);
    let v_d = Mat::from_fn(vt.ncols(), d, |r, c| vt[(order[c], r)]);
    let proj_a = lx.tr_solve_lower_triangular(&u_d).ok_or_else(resample)?;
    let proj_b = ly.tr_solve_lower_triangular(&v_d).ok_or_else(resample)?;

    let pwcca_weights = if xr.ncols() <= yr.ncols() {
        pwcca_weights(&xr, &(&xr * &proj_a))?
    } else {
        pwcca_weights(&yr, &(&yr * &proj_b))?
    };
    let summaries = summaries(&rho, &pwcca_weights);
    Ok(CcaResult {
        rho,
        proj_a,
        proj_b,
        pwcca_weights,
        summaries,
        conditioning_warning,
        eps_x: cfg.eps_x,
        eps_y: cfg.eps_y,
        mean_x,
        mean_y,
        reduce_x,
        reduce_y,
    })
}
