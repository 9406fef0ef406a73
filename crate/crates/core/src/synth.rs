//! Seeded synthetic fixtures for self-checks, benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Mat;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n x d` matrix of independent standard normals.
pub fn gaussian(n: usize, d: usize, seed: u64) -> Mat {
    let mut rng = rng(seed);
    Mat::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian.
pub fn random_orthogonal(d: usize, seed: u64) -> Mat {
    gaussian(d, d, seed).qr().q()
}

/// Well-conditioned random invertible matrix: `Q diag(s)` with s in [0.5, 2].
pub fn random_invertible(d: usize, seed: u64) -> Mat {
    let mut rng = rng(seed ^ 0x5eed);
    let q = random_orthogonal(d, seed);
    let mut m = q;
    for mut c in m.column_iter_mut() {
        c *= rng.random_range(0.5..2.0);
    }
    m
}

/// Uniform random labels in `0..k`.
pub fn random_labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng(seed);
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Frames that stay constant within each segment; consecutive segments use
/// different random directions. Returns the frames and the internal
/// boundary frame indices.
pub fn piecewise_constant(lengths: &[usize], dim: usize, seed: u64) -> (Mat, Vec<usize>) {
    let total: usize = lengths.iter().sum();
    let dirs = gaussian(lengths.len(), dim, seed);
    let mut m = Mat::zeros(total, dim);
    let mut bounds = Vec::new();
    let mut r = 0;
    for (k, &len) in lengths.iter().enumerate() {
        if k > 0 {
            bounds.push(r);
        }
        for _ in 0..len {
            m.set_row(r, &dirs.row(k));
            r += 1;
        }
    }
    (m, bounds)
}
