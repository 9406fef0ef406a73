use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtwNorm {
    /// Divide by the number of cells on the chosen path.
    #[default]
    PathLength,
    /// Divide by the longer sequence length.
    MaxLength,
}

impl fmt::Display for DtwNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DtwNorm::PathLength => "path-length",
            DtwNorm::MaxLength => "max-length",
        })
    }
}

impl FromStr for DtwNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path-length" => Ok(DtwNorm::PathLength),
            "max-length" => Ok(DtwNorm::MaxLength),
            _ => Err(Error::Parameter(format!("unknown DTW normalization {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtwAlignment {
    /// Summed cell cost of the best path.
    pub total: f64,
    pub path_len: usize,
    pub normalized: f64,
}

/// Unit-normalizes rows; zero rows are rejected.
pub(crate) fn unit_rows(x: &Mat, what: &str) -> Result<Mat> {
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let norm = row.norm();
        if !(norm > 0.0) {
            return Err(Error::Degenerate(format!("{what} frame {i} has zero norm")));
        }
        row /= norm;
    }
    Ok(out)
}

/// `1 - cos` for unit vectors, computed as half the squared difference so that
/// equal frames cost exactly zero.
pub(crate) fn unit_cosine_distance<R, C, S1, S2>(
    u: nalgebra::Matrix<f64, R, C, S1>,
    v: nalgebra::Matrix<f64, R, C, S2>,
) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S1: nalgebra::RawStorage<f64, R, C>,
    S2: nalgebra::RawStorage<f64, R, C>,
{
    u.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 2.0
}

/// Pairwise cosine distances between the rows of `a` and `b`.
pub fn cosine_cost_matrix(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "frame dims differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let an = unit_rows(a, "first sequence")?;
    let bn = unit_rows(b, "second sequence")?;
    Ok(Mat::from_fn(an.nrows(), bn.nrows(), |i, j| {
        unit_cosine_distance(an.row(i), bn.row(j))
    }))
}

/// Minimum-cost monotone alignment over steps (1,0), (0,1), (1,1). Among
/// paths of equal total cost the shortest wins.
pub fn dtw_align(cost: &Mat, norm: DtwNorm) -> Result<DtwAlignment> {
    let (n, m) = cost.shape();
    if n == 0 || m == 0 {
        return Err(Error::Shape("DTW needs non-empty sequences".into()));
    }
    let mut dp = vec![(f64::INFINITY, usize::MAX); n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, usize::MAX);
                let mut consider = |c: (f64, usize)| {
                    if c.0 < best.0 || (c.0 == best.0 && c.1 < best.1) {
                        best = c;
                    }
                };
                if i > 0 {
                    consider(dp[at(i - 1, j)]);
                }
                if j > 0 {
                    consider(dp[at(i, j - 1)]);
                }
                if i > 0 && j > 0 {
                    consider(dp[at(i - 1, j - 1)]);
                }
                best
            };
            dp[at(i, j)] = (best.0 + cost[(i, j)], best.1 + 1);
        }
    }
    let (total, path_len) = dp[at(n - 1, m - 1)];
    let denom = match norm {
        DtwNorm::PathLength => path_len,
        DtwNorm::MaxLength => n.max(m),
    };
    Ok(DtwAlignment {
        total,
        path_len,
        normalized: total / denom as f64,
    })
}

/// Normalized DTW cost between two frame sequences under cosine distance.
pub fn dtw_distance(a: &Mat, b: &Mat, norm: DtwNorm) -> Result<f64> {
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::Shape("DTW needs non-empty sequences".into()));
    }
    Ok(dtw_align(&cosine_cost_matrix(a, b)?, norm)?.normalized)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cca::tests::gaussian;

    /// Enumerates every monotone path and keeps the (cost, length)-smallest one.
    pub(crate) fn brute_force(cost: &Mat) -> (f64, usize) {
        fn walk(cost: &Mat, i: usize, j: usize, acc: f64, len: usize, best: &mut (f64, usize)) {
            let acc = acc + cost[(i, j)];
            let len = len + 1;
            let (n, m) = cost.shape();
            if i == n - 1 && j == m - 1 {
                if acc < best.0 || (acc == best.0 && len < best.1) {
                    *best = (acc, len);
                }
                return;
            }
            if i + 1 < n {
                walk(cost, i + 1, j, acc, len, best);
            }
            if j + 1 < m {
                walk(cost, i, j + 1, acc, len, best);
            }
            if i + 1 < n && j + 1 < m {
                walk(cost, i + 1, j + 1, acc, len, best);
            }
        }
        let mut best = (f64::INFINITY, usize::MAX);
        walk(cost, 0, 0, 0.0, 0, &mut best);
        best
    }

    #[test]
    fn examples() {
        let a = gaussian(5, 3, 1);
        assert_eq!(dtw_distance(&a, &a, DtwNorm::PathLength).unwrap(), 0.0);
        let x = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let y = Mat::from_row_slice(1, 2, &[0.0, 1.0]);
        assert_eq!(dtw_distance(&x, &y, DtwNorm::PathLength).unwrap(), 1.0);
    }

    #[test]
    fn matches_brute_force_small() {
        for (n, m) in [(3, 2), (1, 5), (4, 4), (6, 3)] {
            let a = gaussian(n, 4, n as u64);
            let b = gaussian(m, 4, 100 + m as u64);
            let c = cosine_cost_matrix(&a, &b).unwrap();
            let got = dtw_align(&c, DtwNorm::PathLength).unwrap();
            let (total, len) = brute_force(&c);
            assert_eq!((got.total, got.path_len), (total, len));
            assert_eq!(got.normalized, total / len as f64);
        }
    }

    #[test]
    fn duplicated_frames_cost_nothing() {
        let a = gaussian(5, 3, 2);
        let idx: Vec<usize> = (0..5).flat_map(|i| [i, i]).collect();
        let warped = a.select_rows(&idx);
        assert_eq!(dtw_distance(&a, &warped, DtwNorm::PathLength).unwrap(), 0.0);
    }

    #[test]
    fn reversal_costs_something() {
        let a = gaussian(6, 3, 3);
        let rev = a.select_rows(&(0..6).rev().collect::<Vec<_>>());
        assert!(dtw_distance(&a, &rev, DtwNorm::PathLength).unwrap() > 0.0);
    }

    #[test]
    fn symmetric() {
        let a = gaussian(7, 3, 4);
        let b = gaussian(4, 3, 5);
        for norm in [DtwNorm::PathLength, DtwNorm::MaxLength] {
            assert_eq!(dtw_distance(&a, &b, norm).unwrap(), dtw_distance(&b, &a, norm).unwrap());
        }
    }

    #[test]
    fn max_length_normalization() {
        let a = gaussian(3, 2, 6);
        let b = gaussian(5, 2, 7);
        let c = cosine_cost_matrix(&a, &b).unwrap();
        let al = dtw_align(&c, DtwNorm::MaxLength).unwrap();
        assert_eq!(al.normalized, al.total / 5.0);
    }

    #[test]
    fn zero_frame_rejected() {
        let a = Mat::zeros(2, 3);
        let b = gaussian(2, 3, 8);
        assert!(matches!(dtw_distance(&a, &b, DtwNorm::PathLength), Err(Error::Degenerate(_))));
    }
}
