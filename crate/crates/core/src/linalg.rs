//! Small dense helpers shared by the similarity metrics.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;

pub fn column_means(x: &Mat) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Subtracts `means` from every row.
pub fn subtract_means(x: &Mat, means: &DVector<f64>) -> Mat {
    let mut out = x.clone();
    for (mut col, &m) in out.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-m);
    }
    out
}

pub fn center_columns(x: &Mat) -> (Mat, DVector<f64>) {
    let means = column_means(x);
    (subtract_means(x, &means), means)
}

/// `a^T b` through the blocked matrix product.
pub fn cross(a: &Mat, b: &Mat) -> Mat {
    a.transpose() * b
}

/// Appends zero columns up to `cols`.
pub fn zero_pad_cols(x: &Mat, cols: usize) -> Mat {
    if x.ncols() >= cols {
        return x.clone();
    }
    let mut out = Mat::zeros(x.nrows(), cols);
    out.view_mut((0, 0), (x.nrows(), x.ncols())).copy_from(x);
    out
}

/// Pearson correlation of two equal-length slices; `None` when either is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}

/// Orthonormal basis of the column space of `x` (thin QR, full column count).
pub fn orth(x: &Mat) -> Mat {
    x.clone().qr().q()
}

/// Smallest prefix length whose share of `values`' total reaches `fraction`.
/// Values are assumed non-negative and sorted non-increasing.
pub(crate) fn mass_prefix(values: &[f64], fraction: f64) -> usize {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return values.len().min(1);
    }
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        acc += v;
        if acc / total >= fraction - 1e-12 {
            return i + 1;
        }
    }
    values.len()
}
