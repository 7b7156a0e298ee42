//! Embedding-quality metrics, k-means clustering metrics and a k-NN
//! classifier.

mod classify;
mod cluster;
mod neighbors;

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{accuracy, knn_classify, train_test_split, DEFAULT_KNN_K, DEFAULT_TEST_FRACTION};
pub use cluster::{
    calinski_harabasz, davies_bouldin, elbow_k, elbow_scan, kmeans, silhouette, KMeansResult, DEFAULT_RESTARTS,
    LLOYD_TOLERANCE, MAX_LLOYD_ITERS,
};
pub use neighbors::{
    max_overlap_k, max_trustworthiness_k, na_distance_ratio, na_knn_overlap, neighbor_order, neighborhood_curves,
    trustworthiness,
};

pub const DEFAULT_MAX_K: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("row counts differ: {high} vs {low}")]
    SizeMismatch { high: usize, low: usize },
    #[error("need at least {needed} points, got {n}")]
    TooFewPoints { n: usize, needed: usize },
    #[error("k = {k} is out of range for n = {n}: {reason}")]
    BadK { k: usize, n: usize, reason: &'static str },
    #[error("clustering metrics need at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("test fraction {0} must lie in (0, 1)")]
    BadFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub value: f64,
}

/// A metric evaluated over a grid of neighborhood sizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Curve(pub Vec<CurvePoint>);

impl Curve {
    pub fn new(points: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Curve(points.into_iter().map(|(k, value)| CurvePoint { k, value }).collect())
    }

    pub fn ks(&self) -> Vec<usize> {
        self.0.iter().map(|p| p.k).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|p| p.value).collect()
    }

    pub fn value_at(&self, k: usize) -> Option<f64> {
        self.0.iter().find(|p| p.k == k).map(|p| p.value)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Curves run on k = 1..=min(max_k, largest valid k).
    pub max_k: usize,
    /// Defaults to the number of distinct labels.
    pub n_clusters: Option<usize>,
    /// Pick the cluster count with the elbow method instead.
    pub elbow: bool,
    pub restarts: usize,
    pub knn_k: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_k: DEFAULT_MAX_K,
            n_clusters: None,
            elbow: false,
            restarts: DEFAULT_RESTARTS,
            knn_k: DEFAULT_KNN_K,
            test_fraction: DEFAULT_TEST_FRACTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_points: usize,
    pub na_ratio: f64,
    pub na_knn: Curve,
    pub trustworthiness: Curve,
    pub n_clusters: usize,
    pub silhouette: f64,
    pub calinski: f64,
    pub davies: f64,
    pub knn_k: usize,
    pub knn_accuracy: f64,
}

/// Largest k shared by both neighborhood curves, capped at `max_k`.
pub fn curve_k_max(n: usize, max_k: usize) -> usize {
    max_k.min(max_overlap_k(n)).min(max_trustworthiness_k(n))
}

/// Full metric suite for a high-dimensional `x`, its embedding `y` and the
/// ground-truth labels. Clustering metrics are computed on a k-means
/// partition of `y`; the k-NN classifier is trained on a seeded split of `y`.
pub fn evaluate(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    labels: &[String],
    cfg: &EvalConfig,
) -> Result<MetricReport, EvalError> {
    let n = x.nrows();
    if y.nrows() != n || labels.len() != n {
        return Err(EvalError::SizeMismatch {
            high: n,
            low: if y.nrows() != n { y.nrows() } else { labels.len() },
        });
    }
    if n < 3 {
        return Err(EvalError::TooFewPoints { n, needed: 3 });
    }
    let na_ratio = na_distance_ratio(x, y)?;
    let k_max = curve_k_max(n, cfg.max_k);
    let (na_knn, tw) = neighborhood_curves(x, y, k_max)?;

    let distinct = labels.iter().collect::<BTreeSet<_>>().len();
    let n_clusters = if cfg.elbow {
        let scan = elbow_scan(y, (2 * distinct.max(2)).min(n), cfg.seed, cfg.restarts)?;
        elbow_k(&scan).unwrap_or(2)
    } else {
        cfg.n_clusters.unwrap_or(distinct)
    }
    .clamp(2, n);
    let partition = kmeans(y, n_clusters, cfg.seed, cfg.restarts)?;
    let (sil, ch, db) = match silhouette(y, &partition.assignments) {
        Ok(s) => (
            s,
            calinski_harabasz(y, &partition.assignments)?,
            davies_bouldin(y, &partition.assignments)?,
        ),
        // k-means collapsed every point onto one centroid (all rows equal)
        Err(EvalError::TooFewClusters(_)) => (0.0, 0.0, 0.0),
        Err(e) => return Err(e),
    };

    let (train, test) = train_test_split(n, cfg.test_fraction, cfg.seed)?;
    let pick = |idx: &[usize]| -> Array2<f64> { Array2::from_shape_fn((idx.len(), y.ncols()), |(r, c)| y[[idx[r], c]]) };
    let train_labels: Vec<String> = train.iter().map(|&i| labels[i].clone()).collect();
    let test_labels: Vec<String> = test.iter().map(|&i| labels[i].clone()).collect();
    let knn_k = cfg.knn_k.min(train.len());
    let predicted = knn_classify(pick(&train).view(), &train_labels, pick(&test).view(), knn_k)?;

    Ok(MetricReport {
        n_points: n,
        na_ratio,
        na_knn,
        trustworthiness: tw,
        n_clusters,
        silhouette: sil,
        calinski: ch,
        davies: db,
        knn_k,
        knn_accuracy: accuracy(&predicted, &test_labels),
    })
}
