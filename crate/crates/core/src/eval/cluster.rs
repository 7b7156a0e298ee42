use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::distance::squared_euclidean;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERS: usize = 300;
/// Lloyd stops once the relative WCSS change falls below this.
pub const LLOYD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    #[serde(skip)]
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub iterations: usize,
}

fn row(y: ArrayView2<'_, f64>, i: usize) -> Vec<f64> {
    y.row(i).to_vec()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.iter().enumerate() {
        let d = squared_euclidean(point, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_euclidean(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            chosen.iter().position(|c| !c).expect("k <= n")
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_euclidean(p, &points[pick]));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (Vec<usize>, Vec<Vec<f64>>, f64, usize) {
    let n = points.len();
    let k = centroids.len();
    let dim = points[0].len();
    let mut assign = vec![0usize; n];
    let mut prev_wcss = f64::INFINITY;
    let mut wcss = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..MAX_LLOYD_ITERS {
        iterations = it + 1;
        let nearest_all: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(p, &centroids)).collect();
        let mut dists: Vec<f64> = Vec::with_capacity(n);
        for (i, (c, d)) in nearest_all.into_iter().enumerate() {
            assign[i] = c;
            dists.push(d);
        }
        // empty clusters take the point farthest from its centroid
        let mut counts = vec![0usize; k];
        for &c in &assign {
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assign[i]] > 1)
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k <= n leaves a cluster with two points");
                counts[assign[far]] -= 1;
                assign[far] = c;
                counts[c] = 1;
                dists[far] = 0.0;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (i, p) in points.iter().enumerate() {
            for (s, v) in sums[assign[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        wcss = points
            .iter()
            .zip(&assign)
            .map(|(p, &c)| squared_euclidean(p, &centroids[c]))
            .sum();
        if prev_wcss.is_finite() && (prev_wcss - wcss).abs() <= LLOYD_TOLERANCE * prev_wcss.max(f64::MIN_POSITIVE) {
            break;
        }
        prev_wcss = wcss;
    }
    (assign, centroids, wcss, iterations)
}

/// k-means++ seeding followed by Lloyd iterations, best of `restarts` by WCSS.
/// Restarts draw from one seeded stream, so the result is a function of the seed.
pub fn kmeans(y: ArrayView2<'_, f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansResult, EvalError> {
    let n = y.nrows();
    if k == 0 || k > n {
        return Err(EvalError::BadK {
            k,
            n,
            reason: "k-means needs 1 <= k <= n",
        });
    }
    let points: Vec<Vec<f64>> = (0..n).map(|i| row(y, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let init = plus_plus(&points, k, &mut rng);
        let (assign, centroids, wcss, iterations) = lloyd(&points, init);
        if best.as_ref().is_none_or(|b| wcss < b.wcss) {
            let dim = y.ncols();
            let flat = Array2::from_shape_fn((k, dim), |(c, j)| centroids[c][j]);
            best = Some(KMeansResult {
                assignments: assign,
                centroids: flat,
                wcss,
                iterations,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// WCSS for k = 1..=k_max, for elbow plots.
pub fn elbow_scan(y: ArrayView2<'_, f64>, k_max: usize, seed: u64, restarts: usize) -> Result<Vec<(usize, f64)>, EvalError> {
    (1..=k_max)
        .map(|k| kmeans(y, k, seed, restarts).map(|r| (k, r.wcss)))
        .collect()
}

/// The k with the largest second difference of WCSS.
pub fn elbow_k(scan: &[(usize, f64)]) -> Option<usize> {
    if scan.len() < 3 {
        return scan.last().map(|s| s.0);
    }
    (1..scan.len() - 1)
        .map(|i| (scan[i].0, scan[i - 1].1 - 2.0 * scan[i].1 + scan[i + 1].1))
        .fold(None, |best: Option<(usize, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|b| b.0)
}

/// Relabels a partition as 0..k in order of first appearance.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn check_partition(y: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(Vec<usize>, usize), EvalError> {
    if labels.len() != y.nrows() {
        return Err(EvalError::SizeMismatch {
            high: y.nrows(),
            low: labels.len(),
        });
    }
    let (lab, k) = compact(labels);
    if k < 2 {
        return Err(EvalError::TooFewClusters(k));
    }
    Ok((lab, k))
}

/// Mean silhouette `(b - a) / max(a, b)`; points in singleton clusters score 0.
pub fn silhouette(y: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64, EvalError> {
    let (lab, k) = check_partition(y, labels)?;
    let n = y.nrows();
    let mut sizes = vec![0usize; k];
    for &l in &lab {
        sizes[l] += 1;
    }
    let points: Vec<Vec<f64>> = (0..n).map(|i| row(y, i)).collect();
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if sizes[lab[i]] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[lab[j]] += squared_euclidean(&points[i], &points[j]).sqrt();
                }
            }
            let a = sums[lab[i]] / (sizes[lab[i]] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != lab[i])
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / n as f64)
}

fn centroids_of(y: ArrayView2<'_, f64>, lab: &[usize], k: usize) -> (Array2<f64>, Vec<usize>) {
    let mut c = Array2::zeros((k, y.ncols()));
    let mut sizes = vec![0usize; k];
    for (i, &l) in lab.iter().enumerate() {
        let mut r = c.row_mut(l);
        r += &y.row(i);
        sizes[l] += 1;
    }
    for (l, mut r) in c.axis_iter_mut(Axis(0)).enumerate() {
        r /= sizes[l] as f64;
    }
    (c, sizes)
}

/// Variance ratio `[B / (k - 1)] / [W / (n - k)]`; 1 when W = 0.
pub fn calinski_harabasz(y: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64, EvalError> {
    let (lab, k) = check_partition(y, labels)?;
    let n = y.nrows();
    let mean: Array1<f64> = y.mean_axis(Axis(0)).expect("nonempty");
    let (c, sizes) = centroids_of(y, &lab, k);
    let between: f64 = (0..k)
        .map(|l| sizes[l] as f64 * (&c.row(l) - &mean).mapv(|v| v * v).sum())
        .sum();
    let within: f64 = (0..n).map(|i| (&y.row(i) - &c.row(lab[i])).mapv(|v| v * v).sum()).sum();
    if within == 0.0 {
        return Ok(1.0);
    }
    Ok(between * (n - k) as f64 / (within * (k - 1) as f64))
}

/// Mean over clusters of `max_{j≠i} (s_i + s_j) / d(c_i, c_j)` with s the mean
/// distance to the centroid; coincident centroids contribute 0.
pub fn davies_bouldin(y: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64, EvalError> {
    let (lab, k) = check_partition(y, labels)?;
    let (c, sizes) = centroids_of(y, &lab, k);
    let mut scatter = vec![0.0; k];
    for (i, &l) in lab.iter().enumerate() {
        scatter[l] += (&y.row(i) - &c.row(l)).mapv(|v| v * v).sum().sqrt();
    }
    for l in 0..k {
        scatter[l] /= sizes[l] as f64;
    }
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = 0.0f64;
        for b in 0..k {
            if a != b {
                let d = (&c.row(a) - &c.row(b)).mapv(|v| v * v).sum().sqrt();
                if d > 0.0 {
                    worst = worst.max((scatter[a] + scatter[b]) / d);
                }
            }
        }
        total += worst;
    }
    Ok(total / k as f64)
}
