//! Dense pairwise Euclidean distances.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

fn pairwise_rows(n: usize, pair: impl Fn(usize, usize) -> f64 + Sync) -> Vec<Vec<f64>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal => 0.0,
                    // lower index first so both halves agree
                    std::cmp::Ordering::Less => pair(i, j),
                    std::cmp::Ordering::Greater => pair(j, i),
                })
                .collect()
        })
        .collect()
}

/// Squared distance between two rows given as (column, value) lists in
/// column order.
fn sparse_squared(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() || j < b.len() {
        let ca = a.get(i).map_or(usize::MAX, |e| e.0);
        let cb = b.get(j).map_or(usize::MAX, |e| e.0);
        let diff = if ca == cb {
            i += 1;
            j += 1;
            a[i - 1].1 - b[j - 1].1
        } else if ca < cb {
            i += 1;
            a[i - 1].1
        } else {
            j += 1;
            -b[j - 1].1
        };
        acc += diff * diff;
    }
    acc
}

/// Symmetric n×n matrix of squared Euclidean distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances {
    sq: Array2<f64>,
}

impl PairwiseDistances {
    /// Computes all squared distances between the rows of `points`.
    ///
    /// Each entry is summed over coordinate differences in column order, so
    /// `sq[i][j]` and `sq[j][i]` are bitwise equal and results do not depend
    /// on the number of worker threads. Mostly-zero inputs such as k-mer
    /// spectra skip the columns where both rows are zero, which leaves every
    /// sum unchanged.
    pub fn from_points(points: ArrayView2<'_, f64>) -> Self {
        let n = points.nrows();
        let nonzero = points.iter().filter(|v| **v != 0.0).count();
        let rows: Vec<Vec<f64>> = if nonzero * 4 < points.len() {
            let sparse: Vec<Vec<(usize, f64)>> = points
                .axis_iter(Axis(0))
                .into_par_iter()
                .map(|r| r.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect())
                .collect();
            pairwise_rows(n, |a, b| sparse_squared(&sparse[a], &sparse[b]))
        } else {
            pairwise_rows(n, |a, b| {
                points
                    .row(a)
                    .iter()
                    .zip(points.row(b).iter())
                    .fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y))
            })
        };
        let mut sq = Array2::zeros((n, n));
        for (mut dst, src) in sq.axis_iter_mut(Axis(0)).zip(rows) {
            dst.assign(&ndarray::ArrayView1::from(&src));
        }
        Self { sq }
    }

    /// Wraps an existing squared-distance matrix.
    ///
    /// # Panics
    /// If the matrix is not square.
    pub fn from_squared(sq: Array2<f64>) -> Self {
        assert_eq!(sq.nrows(), sq.ncols(), "distance matrix must be square");
        Self { sq }
    }

    pub fn len(&self) -> usize {
        self.sq.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.sq.nrows() == 0
    }

    #[inline]
    pub fn squared(&self, i: usize, j: usize) -> f64 {
        self.sq[[i, j]]
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.sq[[i, j]].sqrt()
    }

    pub fn squared_matrix(&self) -> &Array2<f64> {
        &self.sq
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.sq.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
    }

    /// Median over unordered pairs i < j (mean of the two middle values for
    /// an even count). Zero for fewer than two points.
    pub fn median_distance(&self) -> f64 {
        let n = self.len();
        let mut d: Vec<f64> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.distance(i, j))
            .collect();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(f64::total_cmp);
        let m = d.len();
        if m % 2 == 1 {
            d[m / 2]
        } else {
            0.5 * (d[m / 2 - 1] + d[m / 2])
        }
    }
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y))
}
