//! Affinity kernels: perplexity-calibrated Gaussian, Voronoi isolation
//! kernel, and the density-weighted modified isolation kernel (MIK).

mod bandwidth;
mod gaussian;
mod isolation;
mod mercer;
mod mik;

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bandwidth::{calibrate_bandwidths, perplexity_at, BandwidthProfile, PERPLEXITY_TOLERANCE};
pub use gaussian::{gaussian_affinity, gaussian_gram, gaussian_log_affinity};
pub use isolation::{isolation_affinity, IsolationParams, DEFAULT_PSI, DEFAULT_ROUNDS};
pub use mercer::{validate_mercer, MercerReport};
pub use mik::{mik_affinity, mik_gram, mik_log_affinity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
    Isolation,
    Mik,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Gaussian, KernelKind::Isolation, KernelKind::Mik];
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Isolation => "isolation",
            KernelKind::Mik => "mik",
        })
    }
}

impl std::str::FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelKind::Gaussian),
            "isolation" | "ik" => Ok(KernelKind::Isolation),
            "mik" | "modified-isolation" => Ok(KernelKind::Mik),
            other => Err(format!("unknown kernel `{other}`")),
        }
    }
}

/// n×n nonnegative affinity matrix.
///
/// Isolation and MIK affinities are symmetric. The Gaussian affinity uses the
/// row point's bandwidth and is therefore not symmetric; `joint_p`
/// symmetrizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub values: Array2<f64>,
    pub kernel: KernelKind,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Largest |A_ij - A_ji|.
    pub fn max_asymmetry(&self) -> f64 {
        max_asymmetry(&self.values)
    }
}

pub(crate) fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("perplexity {perplexity} must lie strictly between 1 and the point count {n}")]
    BadPerplexity { perplexity: f64, n: usize },
    #[error("isolation sample size psi = {psi} must be in 1..={n}")]
    BadPsi { psi: usize, n: usize },
    #[error("isolation kernel needs at least one round")]
    ZeroRounds,
    #[error("the modified isolation kernel needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("density correction for point {index} is negative ({value}); its weight exceeds the sum of all other weights")]
    NegativeCorrection { index: usize, value: f64 },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}
