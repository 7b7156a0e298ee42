use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::distance::PairwiseDistances;

/// Largest accepted |achieved - target| perplexity before a point is flagged.
pub const PERPLEXITY_TOLERANCE: f64 = 1e-3;

const MAX_STEPS: usize = 100;
/// Bisection stops early once this close to the target.
const STOP_TOLERANCE: f64 = 1e-9;
/// The search bracket spans diameter·10^±12.
const BRACKET_DECADES: f64 = 12.0;

/// Per-point Gaussian bandwidths matched to a target perplexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthProfile {
    pub sigma: Vec<f64>,
    pub target_perplexity: f64,
    pub achieved_perplexity: Vec<f64>,
    /// False when the target was not reached within tolerance, including
    /// points whose distances to all others are zero.
    pub converged: Vec<bool>,
}

impl BandwidthProfile {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn unconverged(&self) -> Vec<usize> {
        self.converged
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(i, _)| i)
            .collect()
    }

    /// Every point shares the same bandwidth.
    pub fn uniform(n: usize, sigma: f64) -> Self {
        Self {
            sigma: vec![sigma; n],
            target_perplexity: f64::NAN,
            achieved_perplexity: vec![f64::NAN; n],
            converged: vec![true; n],
        }
    }
}

/// Perplexity `exp(H)` of the conditional distribution
/// `P_{j|i} ∝ exp(-d²_ij / (2σ²))` over the given squared distances to the
/// other points. Equivalent to `2^H` with H in bits.
pub fn perplexity_at(sq_dists: &[f64], sigma: f64) -> f64 {
    let d_min = sq_dists.iter().copied().fold(f64::INFINITY, f64::min);
    let two_var = 2.0 * sigma * sigma;
    let weights: Vec<f64> = sq_dists.iter().map(|&d| (-(d - d_min) / two_var).exp()).collect();
    let z: f64 = weights.iter().sum();
    let entropy: f64 = weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / z;
            -p * p.ln()
        })
        .sum();
    entropy.exp()
}

/// Binary search of σ_i for every point so that the perplexity of its
/// conditional neighbor distribution equals `perplexity`.
///
/// The search runs in log σ over `[diam·1e-12, diam·1e12]` for at most 100
/// halvings. A point at zero distance from every other point has a uniform
/// conditional distribution regardless of σ; it gets σ = diameter and is
/// flagged unless the target happens to equal n - 1.
pub fn calibrate_bandwidths(distances: &PairwiseDistances, perplexity: f64) -> Result<BandwidthProfile, KernelError> {
    let n = distances.len();
    if !(perplexity > 1.0 && perplexity < n as f64) {
        return Err(KernelError::BadPerplexity { perplexity, n });
    }
    let diameter = distances.diameter();
    let scale = if diameter > 0.0 { diameter } else { 1.0 };

    let results: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| distances.squared(i, j)).collect();
            calibrate_one(&row, perplexity, scale)
        })
        .collect();

    let (sigma, achieved): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    let converged = achieved
        .iter()
        .map(|a| (a - perplexity).abs() <= PERPLEXITY_TOLERANCE)
        .collect();
    Ok(BandwidthProfile {
        sigma,
        target_perplexity: perplexity,
        achieved_perplexity: achieved,
        converged,
    })
}

fn calibrate_one(row: &[f64], target: f64, scale: f64) -> (f64, f64) {
    if row.iter().all(|&d| d == 0.0) {
        return (scale, row.len() as f64);
    }
    let bound = BRACKET_DECADES * std::f64::consts::LN_10;
    let (mut lo, mut hi) = (-bound, bound);
    let mut best = (scale, perplexity_at(row, scale));
    for _ in 0..MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        let sigma = scale * mid.exp();
        let perp = perplexity_at(row, sigma);
        if (perp - target).abs() < (best.1 - target).abs() {
            best = (sigma, perp);
        }
        if (perp - target).abs() <= STOP_TOLERANCE {
            break;
        }
        // perplexity grows with σ
        if perp > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    best
}
