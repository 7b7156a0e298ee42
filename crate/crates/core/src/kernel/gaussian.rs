use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::{AffinityMatrix, BandwidthProfile, KernelError, KernelKind};
use crate::distance::PairwiseDistances;

/// Conditional Gaussian kernel `A_ij = exp(-‖x_i - x_j‖² / (2σ_i²))` with a
/// zero diagonal. Row i uses its own bandwidth, so the matrix is generally
/// not symmetric.
pub fn gaussian_affinity(distances: &PairwiseDistances, bw: &BandwidthProfile) -> Result<AffinityMatrix, KernelError> {
    let n = distances.len();
    if bw.len() != n {
        return Err(KernelError::SizeMismatch(format!("{n} points but {} bandwidths", bw.len())));
    }
    let mut values = Array2::zeros((n, n));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let two_var = 2.0 * bw.sigma[i] * bw.sigma[i];
            for j in 0..n {
                if j != i {
                    row[j] = (-distances.squared(i, j) / two_var).exp();
                }
            }
        });
    Ok(AffinityMatrix {
        values,
        kernel: KernelKind::Gaussian,
    })
}

/// Elementwise log of [`gaussian_affinity`], `-inf` on the diagonal. Used to
/// normalize rows without underflow when a point is far from all others.
pub fn gaussian_log_affinity(distances: &PairwiseDistances, bw: &BandwidthProfile) -> Result<Array2<f64>, KernelError> {
    let n = distances.len();
    if bw.len() != n {
        return Err(KernelError::SizeMismatch(format!("{n} points but {} bandwidths", bw.len())));
    }
    let mut values = Array2::zeros((n, n));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let two_var = 2.0 * bw.sigma[i] * bw.sigma[i];
            for j in 0..n {
                row[j] = if j == i {
                    f64::NEG_INFINITY
                } else {
                    -distances.squared(i, j) / two_var
                };
            }
        });
    Ok(values)
}

/// Gram matrix of the RBF kernel with one shared bandwidth, unit diagonal.
pub fn gaussian_gram(distances: &PairwiseDistances, sigma: f64) -> Array2<f64> {
    let n = distances.len();
    let two_var = 2.0 * sigma * sigma;
    Array2::from_shape_fn((n, n), |(i, j)| (-distances.squared(i, j) / two_var).exp())
}
