use ndarray::ArrayView2;
use rayon::prelude::*;

use super::{Curve, EvalError};
use crate::distance::PairwiseDistances;

/// For every point, the other points sorted by distance, ties broken by
/// lower index.
pub fn neighbor_order(points: ArrayView2<'_, f64>) -> Vec<Vec<u32>> {
    let d = PairwiseDistances::from_points(points);
    let n = d.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut idx: Vec<u32> = (0..n as u32).filter(|&j| j as usize != i).collect();
            idx.sort_by(|&a, &b| {
                d.squared(i, a as usize)
                    .total_cmp(&d.squared(i, b as usize))
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}

fn check_pair(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<usize, EvalError> {
    if x.nrows() != y.nrows() {
        return Err(EvalError::SizeMismatch {
            high: x.nrows(),
            low: y.nrows(),
        });
    }
    if x.nrows() < 2 {
        return Err(EvalError::TooFewPoints { n: x.nrows(), needed: 2 });
    }
    Ok(x.nrows())
}

/// `1 - mean_{i<j} |d^H_ij - d^L_ij| / (d^H_ij + d^L_ij)`; pairs at zero
/// distance in both spaces contribute 0.
pub fn na_distance_ratio(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64, EvalError> {
    let n = check_pair(x, y)?;
    let dh = PairwiseDistances::from_points(x);
    let dl = PairwiseDistances::from_points(y);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let (a, b) = (dh.distance(i, j), dl.distance(i, j));
                    if a + b > 0.0 {
                        (a - b).abs() / (a + b)
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(1.0 - rows.iter().sum::<f64>() / pairs)
}

/// Largest k accepted by [`na_knn_overlap`].
pub fn max_overlap_k(n: usize) -> usize {
    n.saturating_sub(1)
}

/// Largest k accepted by [`trustworthiness`]: the largest k with 2k < n.
pub fn max_trustworthiness_k(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

/// Total k-NN overlap counts for k = 1..=k_max.
fn overlap_counts(hx: &[Vec<u32>], hy: &[Vec<u32>], k_max: usize) -> Vec<u64> {
    let n = hx.len();
    let per_point: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut in_x = vec![false; n];
            let mut in_y = vec![false; n];
            let mut shared = 0u64;
            let mut out = Vec::with_capacity(k_max);
            for m in 0..k_max {
                let a = hx[i][m] as usize;
                if in_y[a] {
                    shared += 1;
                }
                in_x[a] = true;
                let b = hy[i][m] as usize;
                if in_x[b] {
                    shared += 1;
                }
                in_y[b] = true;
                out.push(shared);
            }
            out
        })
        .collect();
    (0..k_max).map(|m| per_point.iter().map(|c| c[m]).sum()).collect()
}

/// Trustworthiness penalty sums `Σ_i Σ_{j∈U_k(i)} (r(i,j) - k)` for
/// k = 1..=k_max.
fn trust_penalties(hx: &[Vec<u32>], hy: &[Vec<u32>], k_max: usize) -> Vec<u64> {
    let n = hx.len();
    let per_point: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rank = vec![0u64; n];
            for (pos, &j) in hx[i].iter().enumerate() {
                rank[j as usize] = pos as u64 + 1;
            }
            (1..=k_max)
                .map(|k| {
                    hy[i][..k]
                        .iter()
                        .map(|&j| rank[j as usize].saturating_sub(k as u64))
                        .sum()
                })
                .collect()
        })
        .collect();
    (0..k_max).map(|m| per_point.iter().map(|c| c[m]).sum()).collect()
}

fn overlap_value(total: u64, n: usize, k: usize) -> f64 {
    total as f64 / (n * k) as f64
}

fn trust_value(penalty: u64, n: usize, k: usize) -> f64 {
    let norm = (n * k * (2 * n - 3 * k - 1)) as f64;
    1.0 - 2.0 * penalty as f64 / norm
}

fn check_overlap_k(n: usize, k: usize) -> Result<(), EvalError> {
    if k == 0 || k > max_overlap_k(n) {
        return Err(EvalError::BadK {
            k,
            n,
            reason: "k-NN overlap needs 1 <= k < n",
        });
    }
    Ok(())
}

fn check_trust_k(n: usize, k: usize) -> Result<(), EvalError> {
    if k == 0 || k > max_trustworthiness_k(n) {
        return Err(EvalError::BadK {
            k,
            n,
            reason: "trustworthiness needs 1 <= k < n/2",
        });
    }
    Ok(())
}

/// Mean over points of `|kNN_X(i) ∩ kNN_Y(i)| / k`.
pub fn na_knn_overlap(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, k: usize) -> Result<f64, EvalError> {
    let n = check_pair(x, y)?;
    check_overlap_k(n, k)?;
    let counts = overlap_counts(&neighbor_order(x), &neighbor_order(y), k);
    Ok(overlap_value(counts[k - 1], n, k))
}

/// `T(k) = 1 - 2/(n k (2n - 3k - 1)) Σ_i Σ_{j∈U_k(i)} (r(i,j) - k)`, where
/// `U_k(i)` holds the low-dimensional neighbors of i that are not among its
/// k high-dimensional neighbors and `r(i,j)` is the high-dimensional rank.
pub fn trustworthiness(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, k: usize) -> Result<f64, EvalError> {
    let n = check_pair(x, y)?;
    check_trust_k(n, k)?;
    let pen = trust_penalties(&neighbor_order(x), &neighbor_order(y), k);
    Ok(trust_value(pen[k - 1], n, k))
}

/// Both neighborhood curves on k = 1..=k_max from one pair of neighbor orders.
pub fn neighborhood_curves(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    k_max: usize,
) -> Result<(Curve, Curve), EvalError> {
    let n = check_pair(x, y)?;
    check_overlap_k(n, k_max)?;
    check_trust_k(n, k_max)?;
    let hx = neighbor_order(x);
    let hy = neighbor_order(y);
    let counts = overlap_counts(&hx, &hy, k_max);
    let pens = trust_penalties(&hx, &hy, k_max);
    let ks: Vec<usize> = (1..=k_max).collect();
    let na = Curve::new(ks.iter().map(|&k| (k, overlap_value(counts[k - 1], n, k))));
    let tw = Curve::new(ks.iter().map(|&k| (k, trust_value(pens[k - 1], n, k))));
    Ok((na, tw))
}
