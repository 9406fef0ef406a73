//! Linear CKA and orthogonal Procrustes distance on centered,
//! Frobenius-normalized views.

use serde::{Deserialize, Serialize};

use crate::linalg::{center_columns, column_means, cross, zero_pad_cols, Mat};
use crate::{Error, Result};

/// Procrustes distances above `2 + PROCRUSTES_ANOMALY_TOL` are flagged.
pub const PROCRUSTES_ANOMALY_TOL: f64 = 1e-6;

/// Column means and Frobenius norm removed from one view.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocState {
    pub means: Vec<f64>,
    pub frobenius: f64,
}

fn check_pair(x: &Mat, y: &Mat) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!("views have {} and {} rows", x.nrows(), y.nrows())));
    }
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Shape("empty view".into()));
    }
    Ok(())
}

/// Centers the columns of `x` and scales it to unit Frobenius norm.
pub fn center_and_normalize(x: &Mat) -> Result<(Mat, PreprocState)> {
    let (c, means) = center_columns(x);
    let norm = c.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Degenerate("view has zero norm after centering".into()));
    }
    Ok((
        c / norm,
        PreprocState {
            means: means.iter().copied().collect(),
            frobenius: norm,
        },
    ))
}

/// `||Y^T X||_F^2 / (||X^T X||_F ||Y^T Y||_F)` after centering; 1 means aligned.
pub fn linear_cka(x: &Mat, y: &Mat) -> Result<f64> {
    check_pair(x, y)?;
    let (xc, _) = center_columns(x);
    let (yc, _) = center_columns(y);
    let xx = cross(&xc, &xc).norm();
    let yy = cross(&yc, &yc).norm();
    if !(xx > 0.0 && yy > 0.0) {
        return Err(Error::Degenerate("zero-norm view in CKA".into()));
    }
    // Averaging both products keeps the score bit-symmetric in its arguments.
    let yx = 0.5 * (cross(&yc, &xc).norm_squared() + cross(&xc, &yc).norm_squared());
    Ok(yx / (xx * yy))
}

/// Result of a Procrustes comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcrustesOutcome {
    pub distance: f64,
    /// Distance exceeded 2 beyond tolerance.
    pub anomaly: bool,
    /// Zero columns appended to the narrower view.
    pub padded_cols: usize,
}

fn prepare_pair(x: &Mat, y: &Mat) -> Result<(Mat, Mat, usize)> {
    check_pair(x, y)?;
    let (xn, _) = center_and_normalize(x)?;
    let (yn, _) = center_and_normalize(y)?;
    let d = xn.ncols().max(yn.ncols());
    let padded = 2 * d - xn.ncols() - yn.ncols();
    Ok((zero_pad_cols(&xn, d), zero_pad_cols(&yn, d), padded))
}

/// `||X||_F^2 + ||Y||_F^2 - 2 ||X^T Y||_*` on centered, unit-norm, width-matched views.
pub fn procrustes_distance(x: &Mat, y: &Mat) -> Result<ProcrustesOutcome> {
    let (xn, yn, padded_cols) = prepare_pair(x, y)?;
    let nuclear: f64 = cross(&xn, &yn).singular_values().iter().sum();
    let distance = xn.norm_squared() + yn.norm_squared() - 2.0 * nuclear;
    let anomaly = distance > 2.0 + PROCRUSTES_ANOMALY_TOL;
    if anomaly {
        log::warn!("Procrustes distance {distance} exceeds 2");
    }
    Ok(ProcrustesOutcome {
        distance,
        anomaly,
        padded_cols,
    })
}

/// Orthogonal `R` minimizing `||Y - X R||_F` for the prepared views
/// (rows are samples, so `R` acts on feature columns). Returned with the
/// prepared views so callers can evaluate the residual.
pub fn procrustes_rotation(x: &Mat, y: &Mat) -> Result<(Mat, Mat, Mat)> {
    let (xn, yn, _) = prepare_pair(x, y)?;
    let r = rotation_between(&xn, &yn)?;
    Ok((r, xn, yn))
}

/// `U V^T` from the SVD of `X^T Y`.
pub fn rotation_between(x: &Mat, y: &Mat) -> Result<Mat> {
    let svd = cross(x, y).svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => Ok(u * vt),
        _ => Err(Error::Conditioning("SVD failed in Procrustes rotation".into())),
    }
}

/// Column means of a prepared view, for checking the centering invariant.
pub fn max_abs_column_mean(x: &Mat) -> f64 {
    column_means(x).iter().fold(0.0, |m, v| m.max(v.abs()))
}
