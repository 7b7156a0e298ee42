//! t-SNE: joint distributions, KL loss, its gradient, and momentum gradient
//! descent, plus the end-to-end pipeline from features to a 2-D layout.
//!
//! All reductions over points are done per row in parallel and then summed
//! sequentially in row order, so results are bitwise identical for any
//! number of worker threads.

use std::fmt;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DbscanParams, DensityError, DensityProfile};
use crate::distance::PairwiseDistances;
use crate::embed::FeatureMatrix;
use crate::init::{initialize, InitError, InitMethod, LowDimEmbedding};
use crate::kernel::{
    calibrate_bandwidths, gaussian_affinity, gaussian_log_affinity, isolation_affinity, mik_affinity, mik_log_affinity,
    AffinityMatrix, BandwidthProfile, IsolationParams, KernelError, KernelKind,
};

pub const DEFAULT_Q_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TsneError {
    #[error("need at least {needed} points, got {n}")]
    TooFewPoints { n: usize, needed: usize },
    #[error("point {index} has zero affinity to every other point")]
    IsolatedPoint { index: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid optimizer configuration: {0}")]
    BadConfig(String),
    #[error("optimization diverged at iteration {iteration} (last finite iteration: {})", last_finite.map_or("none".to_string(), |i| i.to_string()))]
    Diverged { iteration: usize, last_finite: Option<usize> },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Init(#[from] InitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    High,
    Low,
}

/// Symmetric n×n probability matrix with zero diagonal (P or Q).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub values: Array2<f64>,
    pub space: Space,
}

/// Measured deviations from the joint-distribution invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionCheck {
    pub max_asymmetry: f64,
    pub max_abs_diagonal: f64,
    pub min_entry: f64,
    pub total: f64,
}

impl DistributionCheck {
    pub fn holds(&self, symmetry_tol: f64, sum_tol: f64) -> bool {
        self.max_asymmetry <= symmetry_tol
            && self.max_abs_diagonal == 0.0
            && self.min_entry >= 0.0
            && (self.total - 1.0).abs() <= sum_tol
    }
}

impl fmt::Display for DistributionCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "asym {:.3e}, diag {:.3e}, min {:.3e}, sum-1 {:.3e}",
            self.max_asymmetry,
            self.max_abs_diagonal,
            self.min_entry,
            self.total - 1.0
        )
    }
}

impl JointDistribution {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn check(&self) -> DistributionCheck {
        let v = &self.values;
        let n = v.nrows();
        let mut check = DistributionCheck {
            max_asymmetry: 0.0,
            max_abs_diagonal: 0.0,
            min_entry: f64::INFINITY,
            total: ordered_sum(v.view()),
        };
        for i in 0..n {
            check.max_abs_diagonal = check.max_abs_diagonal.max(v[[i, i]].abs());
            for j in 0..n {
                check.min_entry = check.min_entry.min(v[[i, j]]);
                if j > i {
                    check.max_asymmetry = check.max_asymmetry.max((v[[i, j]] - v[[j, i]]).abs());
                }
            }
        }
        check
    }
}

/// Row sums in parallel, then a sequential sum over rows.
fn ordered_sum(m: ArrayView2<'_, f64>) -> f64 {
    let rows: Vec<f64> = m.axis_iter(Axis(0)).into_par_iter().map(|r| r.sum()).collect();
    rows.iter().sum()
}

/// High-dimensional joint distribution from an affinity matrix:
/// `P_{j|i} = A_ij / Σ_{k≠i} A_ik` and `P_ij = (P_{i|j} + P_{j|i}) / (2n)`.
/// The diagonal of `A` is ignored.
pub fn joint_p(affinity: &AffinityMatrix) -> Result<JointDistribution, TsneError> {
    let a = &affinity.values;
    let n = a.nrows();
    if n < 2 {
        return Err(TsneError::TooFewPoints { n, needed: 2 });
    }
    if a.ncols() != n {
        return Err(TsneError::Shape(format!("affinity is {}x{}", n, a.ncols())));
    }
    symmetrized_conditionals(a)
}

/// [`joint_p`] from elementwise log-affinities (`-inf` on the diagonal).
/// Each row is shifted by its maximum before exponentiating, so a point whose
/// affinities would all underflow still gets a proper conditional
/// distribution. Consumes the matrix to avoid a second n×n buffer.
pub fn joint_p_from_log(mut log_affinity: Array2<f64>) -> Result<JointDistribution, TsneError> {
    let n = log_affinity.nrows();
    if n < 2 {
        return Err(TsneError::TooFewPoints { n, needed: 2 });
    }
    if log_affinity.ncols() != n {
        return Err(TsneError::Shape(format!("affinity is {}x{}", n, log_affinity.ncols())));
    }
    let finite_max: Vec<bool> = log_affinity
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let m = (0..n).filter(|&j| j != i).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
            row[i] = 0.0;
            for j in (0..n).filter(|&j| j != i) {
                row[j] = (row[j] - m).exp();
            }
            m.is_finite()
        })
        .collect();
    if let Some(index) = finite_max.iter().position(|ok| !ok) {
        return Err(TsneError::IsolatedPoint { index });
    }
    symmetrized_conditionals(&log_affinity)
}

fn symmetrized_conditionals(a: &Array2<f64>) -> Result<JointDistribution, TsneError> {
    let n = a.nrows();
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| j != i).map(|j| a[[i, j]]).sum())
        .collect();
    if let Some(index) = row_sums.iter().position(|s| s.is_nan() || *s <= 0.0) {
        return Err(TsneError::IsolatedPoint { index });
    }
    let denom = 2.0 * n as f64;
    let mut p = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = (a[[i, j]] / row_sums[i] + a[[j, i]] / row_sums[j]) / denom;
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }
    Ok(JointDistribution {
        values: p,
        space: Space::High,
    })
}

/// Student-t kernel `W_ij = (1 + ‖y_i - y_j‖²)^{-1}`, zero diagonal, and its total.
fn student_t(y: ArrayView2<'_, f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let dims = y.ncols();
    let y = y.as_standard_layout();
    let flat = y.as_slice().expect("standard layout");
    let mut w = Array2::zeros((n, n));
    let row_sums: Vec<f64> = w
        .as_slice_mut()
        .expect("fresh array")
        .par_chunks_mut(n.max(1))
        .enumerate()
        .map(|(i, row)| {
            let yi = &flat[i * dims..(i + 1) * dims];
            let mut s = 0.0;
            for (j, yj) in flat.chunks_exact(dims).enumerate() {
                if j != i {
                    let d2 = yi.iter().zip(yj).fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b));
                    let v = 1.0 / (1.0 + d2);
                    row[j] = v;
                    s += v;
                }
            }
            s
        })
        .collect();
    (w, row_sums.iter().sum())
}

/// Low-dimensional joint distribution
/// `Q_ij = (1 + ‖y_i - y_j‖²)^{-1} / Σ_{k≠l} (1 + ‖y_k - y_l‖²)^{-1}`.
pub fn joint_q(y: ArrayView2<'_, f64>) -> Result<JointDistribution, TsneError> {
    let n = y.nrows();
    if n < 2 {
        return Err(TsneError::TooFewPoints { n, needed: 2 });
    }
    let (mut w, total) = student_t(y);
    w.mapv_inplace(|v| v / total);
    Ok(JointDistribution {
        values: w,
        space: Space::Low,
    })
}

#[inline]
fn kl_term(p: f64, q: f64, q_floor: f64) -> f64 {
    if p > 0.0 {
        p * (p / q.max(q_floor)).ln()
    } else {
        0.0
    }
}

/// `KL(P‖Q) = Σ P_ij ln(P_ij / max(Q_ij, q_floor))`, with `0 · ln 0 = 0`.
pub fn kl_loss(p: &JointDistribution, q: &JointDistribution, q_floor: f64) -> f64 {
    let rows: Vec<f64> = p
        .values
        .axis_iter(Axis(0))
        .into_par_iter()
        .zip(q.values.axis_iter(Axis(0)))
        .map(|(pr, qr)| pr.iter().zip(qr.iter()).map(|(&a, &b)| kl_term(a, b, q_floor)).sum())
        .collect();
    rows.iter().sum()
}

/// `∂KL/∂y_i = 4 Σ_j (P_ij - Q_ij)(1 + ‖y_i - y_j‖²)^{-1}(y_i - y_j)`.
pub fn gradient(p: &JointDistribution, q: &JointDistribution, y: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = y.nrows();
    let dims = y.ncols();
    let mut grad = Array2::zeros((n, dims));
    grad.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut g)| {
            let yi = y.row(i);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let yj = y.row(j);
                let d2: f64 = yi.iter().zip(yj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                let coeff = 4.0 * (p.values[[i, j]] - q.values[[i, j]]) / (1.0 + d2);
                for c in 0..dims {
                    g[c] += coeff * (yi[c] - yj[c]);
                }
            }
        });
    grad
}

/// Loss and gradient at `y` in one pass, without materializing Q.
/// `p_scale` multiplies P inside the gradient (early exaggeration); the loss
/// always uses the unscaled P. Also returns the Student-t matrix and its total.
fn loss_and_gradient(
    p: &Array2<f64>,
    y: ArrayView2<'_, f64>,
    q_floor: f64,
    p_scale: f64,
) -> (f64, Array2<f64>, Array2<f64>, f64) {
    let n = y.nrows();
    let dims = y.ncols();
    let (w, total) = student_t(y);
    let y = y.as_standard_layout();
    let flat = y.as_slice().expect("standard layout");
    let p = p.as_standard_layout();
    let p_flat = p.as_slice().expect("standard layout");
    let w_flat = w.as_slice().expect("standard layout");
    let mut grad = Array2::zeros((n, dims));
    let losses: Vec<f64> = grad
        .as_slice_mut()
        .expect("fresh array")
        .par_chunks_mut(dims.max(1))
        .enumerate()
        .map(|(i, g)| {
            let yi = &flat[i * dims..(i + 1) * dims];
            let p_row = &p_flat[i * n..(i + 1) * n];
            let w_row = &w_flat[i * n..(i + 1) * n];
            let mut loss = 0.0;
            for (j, yj) in flat.chunks_exact(dims).enumerate() {
                if j == i {
                    continue;
                }
                let wij = w_row[j];
                let qij = wij / total;
                let pij = p_row[j];
                loss += kl_term(pij, qij, q_floor);
                let coeff = 4.0 * (p_scale * pij - qij) * wij;
                for c in 0..dims {
                    g[c] += coeff * (yi[c] - yj[c]);
                }
            }
            loss
        })
        .collect();
    (losses.iter().sum(), grad, w, total)
}

/// Q-invariant check from the Student-t matrix and its total.
fn q_check(w: &Array2<f64>, total: f64) -> DistributionCheck {
    let n = w.nrows();
    let flat = w.as_slice().expect("standard layout");
    let rows: Vec<(f64, f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &flat[i * n..(i + 1) * n];
            let mut asym = 0.0f64;
            let mut min = f64::INFINITY;
            for (j, &v) in row.iter().enumerate() {
                min = min.min(v);
                if j > i {
                    asym = asym.max((v - flat[j * n + i]).abs() / total);
                }
            }
            (asym, row[i].abs(), min / total, row.iter().sum::<f64>())
        })
        .collect();
    rows.iter().fold(
        DistributionCheck {
            max_asymmetry: 0.0,
            max_abs_diagonal: 0.0,
            min_entry: f64::INFINITY,
            total: 0.0,
        },
        |acc, r| DistributionCheck {
            max_asymmetry: acc.max_asymmetry.max(r.0),
            max_abs_diagonal: acc.max_abs_diagonal.max(r.1),
            min_entry: acc.min_entry.min(r.2),
            total: acc.total + r.3 / total,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Zero-based iteration from which `final_momentum` applies.
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub q_floor: f64,
}

impl Default for OptimizerConfig {
    /// 1000 iterations, η = 500, momentum 0.5 switching to 0.8 after 250
    /// iterations, no exaggeration.
    fn default() -> Self {
        Self {
            iterations: 1000,
            learning_rate: 500.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 1.0,
            exaggeration_iters: 0,
            q_floor: DEFAULT_Q_FLOOR,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), TsneError> {
        let bad = |msg: String| Err(TsneError::BadConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        for m in [self.initial_momentum, self.final_momentum] {
            if !(0.0..1.0).contains(&m) {
                return bad(format!("momentum {m} must lie in [0, 1)"));
            }
        }
        if !(self.exaggeration >= 1.0 && self.exaggeration.is_finite()) {
            return bad(format!("exaggeration {} must be at least 1", self.exaggeration));
        }
        if !(self.q_floor > 0.0 && self.q_floor < 1.0) {
            return bad(format!("q floor {} must lie in (0, 1)", self.q_floor));
        }
        Ok(())
    }

    pub fn momentum_at(&self, iteration: usize) -> f64 {
        if iteration < self.momentum_switch {
            self.initial_momentum
        } else {
            self.final_momentum
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneTrace {
    /// KL divergence at the start of every iteration.
    pub losses: Vec<f64>,
    /// KL divergence of the returned embedding.
    pub final_loss: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub embedding: Array2<f64>,
}

impl TsneTrace {
    pub fn initial_loss(&self) -> f64 {
        self.losses.first().copied().unwrap_or(self.final_loss)
    }
}

/// Momentum gradient descent on KL(P‖Q):
/// `y(t) = y(t-1) - η ∂KL/∂y + α(t) (y(t-1) - y(t-2))`.
pub fn optimize(p: &JointDistribution, y0: &LowDimEmbedding, cfg: &OptimizerConfig) -> Result<TsneTrace, TsneError> {
    cfg.validate()?;
    let n = p.len();
    if y0.n_points() != n {
        return Err(TsneError::Shape(format!("P has {n} points, initial layout {}", y0.n_points())));
    }
    let mut y = y0.values.clone();
    let mut prev = y.clone();
    let mut losses = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let scale = if t < cfg.exaggeration_iters { cfg.exaggeration } else { 1.0 };
        let (loss, grad, w, total) = loss_and_gradient(&p.values, y.view(), cfg.q_floor, scale);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TsneError::Diverged {
                iteration: t,
                last_finite: t.checked_sub(1),
            });
        }
        if cfg!(debug_assertions) {
            let check = q_check(&w, total);
            debug_assert!(check.holds(1e-12, 1e-10), "Q invariants violated at iteration {t}: {check}");
        }
        losses.push(loss);
        let alpha = cfg.momentum_at(t);
        let mut next = y.clone();
        Zip::from(&mut next)
            .and(&grad)
            .and(&y)
            .and(&prev)
            .for_each(|nx, &g, &cur, &old| *nx = cur - cfg.learning_rate * g + alpha * (cur - old));
        prev = std::mem::replace(&mut y, next);
    }
    let (final_loss, ..) = loss_and_gradient(&p.values, y.view(), cfg.q_floor, 1.0);
    if !final_loss.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(TsneError::Diverged {
            iteration: cfg.iterations,
            last_finite: cfg.iterations.checked_sub(1),
        });
    }
    Ok(TsneTrace {
        losses,
        final_loss,
        iterations: cfg.iterations,
        embedding: y,
    })
}

/// Everything needed to go from features to an optimized layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub kernel: KernelKind,
    pub init: InitMethod,
    pub dims: usize,
    pub perplexity: f64,
    pub optimizer: OptimizerConfig,
    /// DBSCAN radius; derived from the data when absent.
    pub epsilon: Option<f64>,
    pub min_samples: Option<usize>,
    /// Isolation sample size; 64 clipped to n when absent.
    pub psi: Option<usize>,
    pub rounds: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Gaussian,
            init: InitMethod::Random,
            dims: 2,
            perplexity: 30.0,
            optimizer: OptimizerConfig::default(),
            epsilon: None,
            min_samples: None,
            psi: None,
            rounds: crate::kernel::DEFAULT_ROUNDS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub trace: TsneTrace,
    pub affinity: AffinityMatrix,
    pub p: JointDistribution,
    pub initial: LowDimEmbedding,
    pub bandwidths: Option<BandwidthProfile>,
    pub density: Option<DensityProfile>,
    pub dbscan: Option<DbscanParams>,
}

impl PipelineOutput {
    pub fn embedding(&self) -> &Array2<f64> {
        &self.trace.embedding
    }
}

/// Bandwidths → affinity → P → initial layout → optimization.
pub fn run_pipeline(x: &FeatureMatrix, cfg: &PipelineConfig) -> Result<PipelineOutput, TsneError> {
    let n = x.n_points();
    if n < 3 {
        return Err(TsneError::TooFewPoints { n, needed: 3 });
    }
    cfg.optimizer.validate()?;
    let distances = PairwiseDistances::from_points(x.values.view());
    let mut bandwidths = None;
    let mut density = None;
    let mut dbscan = None;
    // Gaussian and MIK conditionals are normalized in log space; the returned
    // affinity is the kernel itself
    let (affinity, p) = match cfg.kernel {
        KernelKind::Gaussian => {
            let bw = calibrate_bandwidths(&distances, cfg.perplexity)?;
            let p = joint_p_from_log(gaussian_log_affinity(&distances, &bw)?)?;
            let a = gaussian_affinity(&distances, &bw)?;
            bandwidths = Some(bw);
            (a, p)
        }
        KernelKind::Mik => {
            let bw = calibrate_bandwidths(&distances, cfg.perplexity)?;
            let params = DbscanParams::resolve(&distances, cfg.epsilon, cfg.min_samples)?;
            let dp = DensityProfile::fit(&distances, &params)?;
            let p = joint_p_from_log(mik_log_affinity(&distances, &bw, &dp)?)?;
            let a = mik_affinity(&distances, &bw, &dp)?;
            bandwidths = Some(bw);
            density = Some(dp);
            dbscan = Some(params);
            (a, p)
        }
        KernelKind::Isolation => {
            let mut params = IsolationParams::defaults_for(n, cfg.seed);
            if let Some(psi) = cfg.psi {
                params.psi = psi;
            }
            params.rounds = cfg.rounds;
            let a = isolation_affinity(&distances, &params)?;
            let p = joint_p(&a)?;
            (a, p)
        }
    };
    let initial = initialize(cfg.init, &x.values, cfg.dims, cfg.seed)?;
    let trace = optimize(&p, &initial, &cfg.optimizer)?;
    Ok(PipelineOutput {
        trace,
        affinity,
        p,
        initial,
        bandwidths,
        density,
        dbscan,
    })
}
