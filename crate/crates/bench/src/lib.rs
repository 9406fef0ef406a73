//! Fixtures shared by the kernel benchmarks.

use rprobe::synth::{gaussian, random_labels};
use rprobe::Mat;

/// Frame-like features with a one-hot phone target of `classes` columns.
pub fn features_and_one_hot(n: usize, d: usize, classes: usize, seed: u64) -> (Mat, Mat) {
    let x = gaussian(n, d, seed);
    let mut y = Mat::zeros(n, classes);
    for (i, c) in random_labels(n, classes, seed + 1).into_iter().enumerate() {
        y[(i, c)] = 1.0;
    }
    (x, y)
}

/// Two segments of `len_a` and `len_b` frames.
pub fn segment_pair(len_a: usize, len_b: usize, d: usize, seed: u64) -> (Mat, Mat) {
    (gaussian(len_a, d, seed), gaussian(len_b, d, seed + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_rows() {
        let (x, y) = features_and_one_hot(20, 3, 4, 1);
        assert_eq!(x.shape(), (20, 3));
        assert!(y.row_iter().all(|r| r.sum() == 1.0));
    }
}
