//! Initial low-dimensional layouts: Gaussian noise, PCA projection, and the
//! random-walk contraction of a noise layout.

use std::fmt;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::PairwiseDistances;
use crate::linalg::symmetric_eigen;

/// Standard deviation of random initial coordinates and of the leading PCA column.
pub const INIT_SCALE: f64 = 1e-4;
pub const DEFAULT_WALK_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    Random,
    Pca,
    Walk,
}

impl InitMethod {
    pub const ALL: [InitMethod; 3] = [InitMethod::Random, InitMethod::Pca, InitMethod::Walk];
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMethod::Random => "random",
            InitMethod::Pca => "pca",
            InitMethod::Walk => "walk",
        })
    }
}

impl std::str::FromStr for InitMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(InitMethod::Random),
            "pca" => Ok(InitMethod::Pca),
            "walk" | "random-walk" | "randomwalk" => Ok(InitMethod::Walk),
            other => Err(format!("unknown initialization `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowDimEmbedding {
    pub values: Array2<f64>,
    pub init_method: InitMethod,
    pub seed: u64,
}

impl LowDimEmbedding {
    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn dims(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InitError {
    #[error("need at least {needed} points, got {n}")]
    TooFewPoints { n: usize, needed: usize },
    #[error("output dimension must be at least 1")]
    ZeroDims,
    #[error("PCA needs dims ≤ min(n, d) = {limit}, got {dims}")]
    TooManyComponents { dims: usize, limit: usize },
    #[error("all rows are identical; PCA has no direction to project on")]
    ZeroVariance,
}

fn noise(rng: &mut ChaCha8Rng, n: usize, dims: usize) -> Array2<f64> {
    let normal = Normal::new(0.0, INIT_SCALE).expect("valid normal");
    Array2::from_shape_simple_fn((n, dims), || normal.sample(rng))
}

/// i.i.d. N(0, 1e-8) coordinates.
pub fn init_random(n: usize, dims: usize, seed: u64) -> Result<LowDimEmbedding, InitError> {
    if n == 0 {
        return Err(InitError::TooFewPoints { n, needed: 1 });
    }
    if dims == 0 {
        return Err(InitError::ZeroDims);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(LowDimEmbedding {
        values: noise(&mut rng, n, dims),
        init_method: InitMethod::Random,
        seed,
    })
}

/// Projects the centered data on its leading principal axes.
///
/// The eigenproblem is solved on the d×d covariance or on the n×n Gram
/// matrix, whichever is smaller. Each axis is oriented so its
/// largest-magnitude loading is positive. The whole projection is then
/// scaled by one factor so the first column has standard deviation 1e-4;
/// relative distances between points are unchanged.
pub fn init_pca(x: &Array2<f64>, dims: usize) -> Result<LowDimEmbedding, InitError> {
    let (n, d) = x.dim();
    if dims == 0 {
        return Err(InitError::ZeroDims);
    }
    if n == 0 {
        return Err(InitError::TooFewPoints { n, needed: 1 });
    }
    let limit = n.min(d);
    if dims > limit {
        return Err(InitError::TooManyComponents { dims, limit });
    }
    let mean = x.mean_axis(Axis(0)).expect("nonempty");

    let mut y = if d <= n {
        let centered = x - &mean;
        let cov = centered.t().dot(&centered);
        let eig = symmetric_eigen(cov.view());
        if eig.values[0].is_nan() || eig.values[0] <= 0.0 {
            return Err(InitError::ZeroVariance);
        }
        let mut loadings = eig.vectors.slice(ndarray::s![.., ..dims]).to_owned();
        for mut col in loadings.axis_iter_mut(Axis(1)) {
            if leading_value(col.iter().copied()) < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
        centered.dot(&loadings)
    } else {
        // centered Gram matrix by double centering the squared distances,
        // which avoids a dense copy of a wide (often sparse) feature matrix
        let sq = PairwiseDistances::from_points(x.view());
        let sq = sq.squared_matrix();
        let row_means: Vec<f64> = sq.rows().into_iter().map(|r| r.sum() / n as f64).collect();
        let grand = row_means.iter().sum::<f64>() / n as f64;
        let gram = Array2::from_shape_fn((n, n), |(i, j)| -0.5 * (sq[[i, j]] - row_means[i] - row_means[j] + grand));
        let eig = symmetric_eigen(gram.view());
        if eig.values[0].is_nan() || eig.values[0] <= 0.0 {
            return Err(InitError::ZeroVariance);
        }
        let mut y = Array2::zeros((n, dims));
        for k in 0..dims {
            let lambda = eig.values[k];
            if lambda <= eig.values[0] * 1e-12 {
                continue;
            }
            let u = eig.vectors.column(k);
            // loading v = X_cᵀ u / √λ, needed only for its orientation
            let u_sum = u.sum();
            let loading = x
                .axis_iter(Axis(1))
                .zip(mean.iter())
                .map(|(col, m)| (col.dot(&u) - m * u_sum) / lambda.sqrt());
            let sign = if leading_value(loading) < 0.0 { -1.0 } else { 1.0 };
            y.column_mut(k).assign(&u.mapv(|v| sign * v * lambda.sqrt()));
        }
        y
    };

    let first_sd = column_sd(&y.column(0).to_owned());
    if first_sd > 0.0 {
        y.mapv_inplace(|v| v * INIT_SCALE / first_sd);
    }
    Ok(LowDimEmbedding {
        values: y,
        init_method: InitMethod::Pca,
        seed: 0,
    })
}

/// Entry of largest magnitude; the first one on ties.
fn leading_value(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best })
}

fn column_sd(col: &Array1<f64>) -> f64 {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Starts from [`init_random`] with the same seed, then for each point in
/// index order takes `steps` moves `Y[i] += (Y[r] - Y[i]) / sqrt(j + 1)`,
/// `j = 1..=steps`, toward a uniformly drawn index `r` (drawing `i` itself is
/// a no-op). Updates are in place, so later points see earlier moves.
pub fn init_random_walk(n: usize, dims: usize, seed: u64, steps: usize) -> Result<LowDimEmbedding, InitError> {
    if n < 2 {
        return Err(InitError::TooFewPoints { n, needed: 2 });
    }
    if dims == 0 {
        return Err(InitError::ZeroDims);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = noise(&mut rng, n, dims);
    for i in 0..n {
        for j in 1..=steps {
            let nbr = rng.random_range(0..n);
            if nbr == i {
                continue;
            }
            let step = 1.0 / ((j + 1) as f64).sqrt();
            for c in 0..dims {
                let delta = y[[nbr, c]] - y[[i, c]];
                y[[i, c]] += delta * step;
            }
        }
    }
    Ok(LowDimEmbedding {
        values: y,
        init_method: InitMethod::Walk,
        seed,
    })
}

/// Dispatches on `method`; `x` is only used by PCA.
pub fn initialize(method: InitMethod, x: &Array2<f64>, dims: usize, seed: u64) -> Result<LowDimEmbedding, InitError> {
    match method {
        InitMethod::Random => init_random(x.nrows(), dims, seed),
        InitMethod::Pca => init_pca(x, dims).map(|e| LowDimEmbedding { seed, ..e }),
        InitMethod::Walk => init_random_walk(x.nrows(), dims, seed, DEFAULT_WALK_STEPS),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn pairwise_sum(y: &Array2<f64>) -> f64 {
        let n = y.nrows();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += (&y.row(i) - &y.row(j)).mapv(|v| v * v).sum().sqrt();
            }
        }
        s
    }

    #[test]
    fn random_is_seeded() {
        let a = init_random(50, 2, 1).unwrap();
        assert_eq!(a, init_random(50, 2, 1).unwrap());
        assert_ne!(a.values, init_random(50, 2, 2).unwrap().values);
        assert_eq!(init_random(0, 2, 1), Err(InitError::TooFewPoints { n: 0, needed: 1 }));
    }

    #[test]
    fn random_scale() {
        let y = init_random(5000, 2, 42).unwrap().values;
        let n = y.len() as f64;
        let mean = y.sum() / n;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd / INIT_SCALE - 1.0).abs() < 0.05, "{sd}");
    }

    #[test]
    fn pca_preserves_planar_distances() {
        // points on a 2-D plane spanned by two orthonormal vectors in R^10
        let mut u = Array1::<f64>::zeros(10);
        let mut v = Array1::<f64>::zeros(10);
        for k in 0..10 {
            u[k] = if k % 2 == 0 { 1.0 } else { -1.0 };
            v[k] = if k % 4 < 2 { 1.0 } else { -1.0 };
        }
        // u·v = 0 for this choice
        assert_eq!(u.dot(&v), 0.0);
        let coords = [(0.0, 0.0), (1.0, 2.0), (-3.0, 0.5), (2.5, -1.0), (0.7, 4.0), (-1.0, -2.0)];
        let offset = Array1::from_iter((0..10).map(|k| k as f64 * 0.3));
        let x = Array2::from_shape_fn((coords.len(), 10), |(i, k)| {
            coords[i].0 * u[k] + coords[i].1 * v[k] + offset[k]
        });
        let y = init_pca(&x, 2).unwrap().values;
        let dist = |m: &Array2<f64>, i: usize, j: usize| (&m.row(i) - &m.row(j)).mapv(|v| v * v).sum().sqrt();
        let ratio = dist(&y, 0, 1) / dist(&x, 0, 1);
        for i in 0..coords.len() {
            for j in i + 1..coords.len() {
                assert!((dist(&y, i, j) / dist(&x, i, j) / ratio - 1.0).abs() < 1e-8);
            }
        }
        assert!((column_sd(&y.column(0).to_owned()) - INIT_SCALE).abs() < 1e-15);
    }

    #[test]
    fn pca_gram_path_matches_covariance_path() {
        // wide matrix (d > n) vs the same data padded with zero columns removed
        let x = array![[1.0, 2.0, 0.5], [2.0, 0.0, 1.0], [4.0, 1.0, -1.0], [0.0, 3.0, 2.0]];
        let tall = init_pca(&x, 2).unwrap().values;
        let mut wide = Array2::zeros((4, 8));
        wide.slice_mut(ndarray::s![.., ..3]).assign(&x);
        let wide = init_pca(&wide, 2).unwrap().values;
        for (a, b) in tall.iter().zip(wide.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn pca_duplicates_and_line_order() {
        let x = array![[0.0, 0.0, 0.0], [1.0, 2.0, 2.0], [1.0, 2.0, 2.0], [3.0, 6.0, 6.0], [-2.0, -4.0, -4.0]];
        let y = init_pca(&x, 1).unwrap().values;
        assert_eq!(y.row(1), y.row(2));
        let pos = [0.0, 1.0, 1.0, 3.0, -2.0];
        for i in 0..5 {
            for j in 0..5 {
                if pos[i] < pos[j] {
                    assert!(y[[i, 0]] < y[[j, 0]]);
                }
            }
        }
    }

    #[test]
    fn pca_errors() {
        assert_eq!(init_pca(&Array2::ones((4, 3)), 1), Err(InitError::ZeroVariance));
        assert_eq!(init_pca(&Array2::ones((2, 3)), 3), Err(InitError::TooManyComponents { dims: 3, limit: 2 }));
    }

    #[test]
    fn walk_first_step() {
        // replay the generator: noise first, then neighbor draws
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let start = noise(&mut rng, 3, 2);
        let nbr = rng.random_range(0..3);
        let walked = init_random_walk(3, 2, 4, 1).unwrap().values;
        let expected = if nbr == 0 {
            start.row(0).to_owned()
        } else {
            &start.row(0) + &((&start.row(nbr) - &start.row(0)) / 2f64.sqrt())
        };
        for c in 0..2 {
            assert!((walked[[0, c]] - expected[c]).abs() < 1e-20);
        }
        assert_eq!(start, init_random(3, 2, 4).unwrap().values);
    }

    #[test]
    fn walk_two_points_contract() {
        let before = init_random(2, 2, 17).unwrap().values;
        let after = init_random_walk(2, 2, 17, 1000).unwrap().values;
        assert!(pairwise_sum(&after) < pairwise_sum(&before));
        assert_eq!(after, init_random_walk(2, 2, 17, 1000).unwrap().values);
    }

    #[test]
    fn walk_contracts_over_seeds() {
        let mut ratio_sum = 0.0;
        for seed in 0..25 {
            let before = pairwise_sum(&init_random(40, 2, seed).unwrap().values);
            let after = pairwise_sum(&init_random_walk(40, 2, seed, DEFAULT_WALK_STEPS).unwrap().values);
            ratio_sum += after / before;
        }
        assert!(ratio_sum / 25.0 < 1.0);
    }

    #[test]
    fn all_inits_are_small() {
        let x = Array2::from_shape_fn((30, 5), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        for m in InitMethod::ALL {
            let y = initialize(m, &x, 2, 3).unwrap();
            assert!(y.values.iter().all(|v| v.is_finite() && v.abs() <= 1e-2), "{m}");
        }
    }
}
