use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{max_asymmetry, KernelError};
use crate::linalg::min_eigenvalue;

/// Symmetry, definiteness and boundedness of a Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MercerReport {
    pub n: usize,
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
    pub max_entry: f64,
    /// Upper bound the entries are expected to respect, if one applies.
    pub bound: Option<f64>,
}

impl MercerReport {
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry <= tol
    }

    /// min eigenvalue ≥ -rel_tol · n · max_entry.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        self.min_eigenvalue >= -rel_tol * self.n as f64 * self.max_entry.max(f64::MIN_POSITIVE)
    }

    pub fn within_bound(&self) -> bool {
        self.bound.is_none_or(|b| self.max_entry <= b)
    }
}

/// Reports the largest asymmetry, the smallest eigenvalue of the symmetric
/// part, and the largest entry (against `bound`, e.g. `max_i 1/p_i` for MIK).
pub fn validate_mercer(gram: &Array2<f64>, bound: Option<f64>) -> Result<MercerReport, KernelError> {
    if gram.nrows() != gram.ncols() {
        return Err(KernelError::NotSquare {
            rows: gram.nrows(),
            cols: gram.ncols(),
        });
    }
    Ok(MercerReport {
        n: gram.nrows(),
        max_asymmetry: max_asymmetry(gram),
        min_eigenvalue: min_eigenvalue(gram.view()),
        max_entry: gram.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        bound,
    })
}
