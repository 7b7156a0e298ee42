use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AffinityMatrix, KernelError, KernelKind};
use crate::distance::PairwiseDistances;

pub const DEFAULT_PSI: usize = 64;
pub const DEFAULT_ROUNDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationParams {
    /// Sample size per round (number of Voronoi cells).
    pub psi: usize,
    /// Number of partitioning rounds.
    pub rounds: usize,
    pub seed: u64,
}

impl IsolationParams {
    /// Default ψ = 64 clipped to `n`, t = 100.
    pub fn defaults_for(n: usize, seed: u64) -> Self {
        Self {
            psi: DEFAULT_PSI.min(n).max(1),
            rounds: DEFAULT_ROUNDS,
            seed,
        }
    }
}

/// Isolation kernel estimated by nearest-sample Voronoi partitioning.
///
/// Each round samples ψ distinct points; every point falls into the cell of
/// its nearest sample (ties go to the lowest point index). `A_ij` is the
/// fraction of rounds in which i and j share a cell, so `A_ii = 1` and every
/// entry is a multiple of `1/t`.
pub fn isolation_affinity(distances: &PairwiseDistances, params: &IsolationParams) -> Result<AffinityMatrix, KernelError> {
    let n = distances.len();
    if params.psi == 0 || params.psi > n {
        return Err(KernelError::BadPsi { psi: params.psi, n });
    }
    if params.rounds == 0 {
        return Err(KernelError::ZeroRounds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counts = vec![0u32; n * n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); params.psi];
    for _ in 0..params.rounds {
        let mut centers = sample(&mut rng, n, params.psi).into_vec();
        centers.sort_unstable();
        members.iter_mut().for_each(Vec::clear);
        for i in 0..n {
            let mut best = 0;
            let mut best_d = distances.squared(i, centers[0]);
            for (c, &s) in centers.iter().enumerate().skip(1) {
                let d = distances.squared(i, s);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            members[best].push(i);
        }
        for cell in &members {
            for &i in cell {
                for &j in cell {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let t = params.rounds as f64;
    let values = Array2::from_shape_fn((n, n), |(i, j)| counts[i * n + j] as f64 / t);
    Ok(AffinityMatrix {
        values,
        kernel: KernelKind::Isolation,
    })
}
