use nalgebra::SymmetricEigen;

use crate::linalg::{cross, mass_prefix, Mat};
use crate::{Error, Result};

/// Top singular directions of a centered view.
#[derive(Debug, Clone)]
pub struct SvdReduction {
    /// d x k right singular vectors, by decreasing singular value.
    pub basis: Mat,
    /// All squared singular values, non-increasing.
    pub spectrum: Vec<f64>,
    /// `x * basis`, equal to `U[:, :k] * diag(s[:k])`.
    pub projected: Mat,
}

impl SvdReduction {
    pub fn retained(&self) -> usize {
        self.basis.ncols()
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        x * &self.basis
    }
}

/// Keeps the smallest number of singular directions whose squared singular
/// values hold at least `tau` of the total. `x` must be mean-centered.
pub fn svcca_project(x: &Mat, tau: f64) -> Result<SvdReduction> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Parameter(format!("tau {tau} not in (0,1]")));
    }
    // Eigen-decomposition of the d x d Gram matrix gives V and s^2 without
    // factoring the tall n x d matrix.
    let eig = SymmetricEigen::new(cross(x, x));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = spectrum.iter().sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(total > 0.0) || scale == 0.0 {
        return Err(Error::Degenerate("all-zero matrix has no singular directions".into()));
    }
    let k = mass_prefix(&spectrum, tau);
    let basis = Mat::from_fn(x.ncols(), k, |r, c| eig.eigenvectors[(r, order[c])]);
    let projected = x * &basis;
    Ok(SvdReduction {
        basis,
        spectrum,
        projected,
    })
}
