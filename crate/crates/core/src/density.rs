//! DBSCAN roles and the per-point density weights derived from them.
//!
//! Core points weigh 1, border points 0.5 and noise points [`NOISE_WEIGHT`].
//! From the weights `n_i` the adaptive density estimate is
//! `p_i = 1 / sqrt(n_i · Σ_{k≠i} n_k)`.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::PairwiseDistances;

pub const CORE_WEIGHT: f64 = 1.0;
pub const BORDER_WEIGHT: f64 = 0.5;
/// Noise points get a small positive weight instead of zero so `p_i` stays finite.
pub const NOISE_WEIGHT: f64 = 1e-3;

pub const DEFAULT_MIN_SAMPLES: usize = 4;
/// Default epsilon is this fraction of the median pairwise distance.
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("min_samples must be at least 1")]
    BadMinSamples,
    #[error("density estimates need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("weight of point {index} is {weight}; weights must be positive")]
    NonPositiveWeight { index: usize, weight: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub epsilon: f64,
    pub min_samples: usize,
}

impl DbscanParams {
    pub fn new(epsilon: f64, min_samples: usize) -> Result<Self, DensityError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(DensityError::BadEpsilon(epsilon));
        }
        if min_samples == 0 {
            return Err(DensityError::BadMinSamples);
        }
        Ok(Self { epsilon, min_samples })
    }

    /// Fills unspecified values from the data: epsilon is half the median
    /// pairwise distance and min_samples defaults to 4. Falls back to
    /// epsilon = 1 when every point coincides.
    pub fn resolve(
        distances: &PairwiseDistances,
        epsilon: Option<f64>,
        min_samples: Option<usize>,
    ) -> Result<Self, DensityError> {
        let epsilon = match epsilon {
            Some(e) => e,
            None => {
                let e = DEFAULT_EPSILON_FRACTION * distances.median_distance();
                if e > 0.0 {
                    e
                } else {
                    1.0
                }
            }
        };
        Self::new(epsilon, min_samples.unwrap_or(DEFAULT_MIN_SAMPLES))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Core,
    Border,
    Noise,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Core => "core",
            Role::Border => "border",
            Role::Noise => "noise",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanResult {
    pub roles: Vec<Role>,
    /// Cluster id per point; `None` for noise.
    pub clusters: Vec<Option<usize>>,
    pub n_clusters: usize,
}

/// DBSCAN over precomputed distances.
///
/// Neighborhoods are closed balls (`d ≤ epsilon`) that include the point
/// itself. Clusters are grown from unvisited core points in index order, so a
/// border point reachable from several clusters keeps the lowest cluster id.
pub fn dbscan(distances: &PairwiseDistances, params: &DbscanParams) -> DbscanResult {
    let n = distances.len();
    let eps_sq = params.epsilon * params.epsilon;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| distances.squared(i, j) <= eps_sq).collect())
        .collect();
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_samples).collect();

    let mut clusters: Vec<Option<usize>> = vec![None; n];
    let mut n_clusters = 0;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !is_core[seed] || clusters[seed].is_some() {
            continue;
        }
        let id = n_clusters;
        n_clusters += 1;
        clusters[seed] = Some(id);
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if clusters[q].is_none() {
                    clusters[q] = Some(id);
                    if is_core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }

    let roles = (0..n)
        .map(|i| match (is_core[i], clusters[i]) {
            (true, _) => Role::Core,
            (false, Some(_)) => Role::Border,
            (false, None) => Role::Noise,
        })
        .collect();
    DbscanResult {
        roles,
        clusters,
        n_clusters,
    }
}

pub fn weight_of(role: Role) -> f64 {
    match role {
        Role::Core => CORE_WEIGHT,
        Role::Border => BORDER_WEIGHT,
        Role::Noise => NOISE_WEIGHT,
    }
}

pub fn weights_from_roles(roles: &[Role]) -> Vec<f64> {
    roles.iter().copied().map(weight_of).collect()
}

/// `p_i = 1/sqrt(n_i · Σ_{k≠i} n_k)` for every point.
pub fn density_estimates(weights: &[f64]) -> Result<Vec<f64>, DensityError> {
    if weights.len() < 2 {
        return Err(DensityError::TooFewPoints(weights.len()));
    }
    if let Some((index, &weight)) = weights.iter().enumerate().find(|(_, w)| w.is_nan() || **w <= 0.0) {
        return Err(DensityError::NonPositiveWeight { index, weight });
    }
    Ok((0..weights.len())
        .map(|i| 1.0 / (weights[i] * sum_excluding(weights, i)).sqrt())
        .collect())
}

/// Σ_{k≠i} w_k summed directly, without subtracting from the total.
pub fn sum_excluding(weights: &[f64], i: usize) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, w)| w)
        .sum()
}

/// Per-point DBSCAN role, weight `n_i` and adaptive density estimate `p_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub roles: Vec<Role>,
    pub weights: Vec<f64>,
    pub p: Vec<f64>,
    /// Σ_{k≠i} n_k for every point.
    pub others_sum: Vec<f64>,
    pub weight_sum: f64,
}

impl DensityProfile {
    pub fn from_roles(roles: Vec<Role>) -> Result<Self, DensityError> {
        let weights = weights_from_roles(&roles);
        let p = density_estimates(&weights)?;
        let others_sum = (0..weights.len()).map(|i| sum_excluding(&weights, i)).collect();
        let weight_sum = weights.iter().sum();
        Ok(Self {
            roles,
            weights,
            p,
            others_sum,
            weight_sum,
        })
    }

    /// Runs DBSCAN and derives the profile.
    pub fn fit(distances: &PairwiseDistances, params: &DbscanParams) -> Result<Self, DensityError> {
        Self::from_roles(dbscan(distances, params).roles)
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    /// `1 - n_i / Σ_{k≠i} n_k`.
    pub fn correction(&self, i: usize) -> f64 {
        1.0 - self.weights[i] / self.others_sum[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> PairwiseDistances {
        let pts = Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap();
        PairwiseDistances::from_points(pts.view())
    }

    /// Roles from the definitions alone: ball counts for core, any core
    /// within epsilon for border.
    fn brute_roles(d: &PairwiseDistances, p: &DbscanParams) -> Vec<Role> {
        let n = d.len();
        let within = |i: usize, j: usize| d.distance(i, j) <= p.epsilon;
        let core: Vec<bool> = (0..n)
            .map(|i| (0..n).filter(|&j| within(i, j)).count() >= p.min_samples)
            .collect();
        (0..n)
            .map(|i| {
                if core[i] {
                    Role::Core
                } else if (0..n).any(|j| core[j] && within(i, j)) {
                    Role::Border
                } else {
                    Role::Noise
                }
            })
            .collect()
    }

    /// Cluster partition of core points via transitive closure of the
    /// core-core epsilon graph.
    fn brute_core_components(d: &PairwiseDistances, p: &DbscanParams, roles: &[Role]) -> Vec<Vec<bool>> {
        let n = d.len();
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                reach[i][j] = i == j
                    || (roles[i] == Role::Core && roles[j] == Role::Core && d.distance(i, j) <= p.epsilon);
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if reach[i][k] && reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
        reach
    }

    #[test]
    fn three_points_on_a_line() {
        let r = dbscan(&line(&[0.0, 1.0, 2.0]), &DbscanParams::new(1.1, 3).unwrap());
        assert_eq!(r.roles, vec![Role::Border, Role::Core, Role::Border]);
        assert_eq!(r.clusters, vec![Some(0); 3]);
    }

    #[test]
    fn lone_point_is_noise() {
        let r = dbscan(&line(&[4.0]), &DbscanParams::new(10.0, 2).unwrap());
        assert_eq!(r.roles, vec![Role::Noise]);
        assert_eq!(r.n_clusters, 0);
    }

    #[test]
    fn identical_points_form_one_core_cluster() {
        let r = dbscan(&line(&[2.0; 6]), &DbscanParams::new(0.1, 6).unwrap());
        assert!(r.roles.iter().all(|&x| x == Role::Core));
        assert_eq!(r.n_clusters, 1);
    }

    #[test]
    fn border_joins_lowest_cluster() {
        let xs = [-0.3, -0.2, -0.1, 0.0, 0.9, 1.8, 1.9, 2.0, 2.1];
        let r = dbscan(&line(&xs), &DbscanParams::new(0.95, 4).unwrap());
        assert_eq!(r.roles[4], Role::Border);
        assert_eq!(r.n_clusters, 2);
        assert_eq!(r.clusters[4], Some(0));
        assert_eq!(r.clusters[5], Some(1));
        let rev: Vec<f64> = xs.iter().rev().map(|x| -x).collect();
        let r = dbscan(&line(&rev), &DbscanParams::new(0.95, 4).unwrap());
        assert_eq!(r.clusters[4], Some(0));
        assert_eq!(r.clusters[3], Some(0));
        assert_eq!(r.clusters[5], Some(1));
    }

    #[test]
    fn weights_from_each_role() {
        assert_eq!(weights_from_roles(&[Role::Core, Role::Border, Role::Noise]), vec![1.0, 0.5, 0.001]);
        assert_eq!(weights_from_roles(&[Role::Core; 3]), vec![1.0; 3]);
        assert_eq!(weights_from_roles(&[Role::Noise; 2]), vec![0.001; 2]);
    }

    #[test]
    fn density_estimate_values() {
        let p = density_estimates(&[1.0, 1.0, 1.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 0.5f64.sqrt()).abs() < 1e-15));
        assert_eq!(density_estimates(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        let p = density_estimates(&[1.0, 0.5, 0.001]).unwrap();
        assert!((p[0] - 1.0 / (0.501f64).sqrt()).abs() < 1e-15);
        assert!((p[1] - 1.0 / (0.5 * 1.001f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn density_estimate_errors() {
        assert_eq!(density_estimates(&[1.0]), Err(DensityError::TooFewPoints(1)));
        assert_eq!(
            density_estimates(&[1.0, 0.0, 1.0]),
            Err(DensityError::NonPositiveWeight { index: 1, weight: 0.0 })
        );
    }

    #[test]
    fn params_validation_and_defaults() {
        assert!(DbscanParams::new(0.0, 3).is_err());
        assert!(DbscanParams::new(1.0, 0).is_err());
        let d = line(&[0.0, 1.0, 3.0]);
        // pair distances 1, 2, 3 -> median 2
        let p = DbscanParams::resolve(&d, None, None).unwrap();
        assert_eq!(p, DbscanParams { epsilon: 1.0, min_samples: 4 });
        let p = DbscanParams::resolve(&line(&[1.0, 1.0]), None, Some(2)).unwrap();
        assert_eq!(p.epsilon, 1.0);
    }

    #[test]
    fn dbscan_matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let n = rng.random_range(1..=50);
            let dim = rng.random_range(1..=4);
            let pts = Array2::from_shape_fn((n, dim), |_| rng.random_range(0.0..10.0));
            let d = PairwiseDistances::from_points(pts.view());
            let params = DbscanParams::new(rng.random_range(0.3..4.0), rng.random_range(1..=6)).unwrap();
            let fast = dbscan(&d, &params);
            let roles = brute_roles(&d, &params);
            assert_eq!(fast.roles, roles);
            let reach = brute_core_components(&d, &params, &roles);
            for i in 0..n {
                for j in 0..n {
                    if roles[i] == Role::Core && roles[j] == Role::Core {
                        assert_eq!(reach[i][j], fast.clusters[i] == fast.clusters[j]);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn roles_are_order_invariant(xs in proptest::collection::vec(0.0f64..20.0, 1..30), eps in 0.2f64..3.0, m in 1usize..5) {
            let params = DbscanParams::new(eps, m).unwrap();
            let fwd = dbscan(&line(&xs), &params).roles;
            let rev_xs: Vec<f64> = xs.iter().rev().copied().collect();
            let mut rev = dbscan(&line(&rev_xs), &params).roles;
            rev.reverse();
            prop_assert_eq!(fwd, rev);
        }

        #[test]
        fn p_decreases_with_own_weight(others in proptest::collection::vec(0.001f64..1.0, 1..10), a in 0.001f64..1.0, b in 0.001f64..1.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut w_lo = vec![lo];
            w_lo.extend(&others);
            let mut w_hi = vec![hi];
            w_hi.extend(&others);
            prop_assert!(density_estimates(&w_hi).unwrap()[0] < density_estimates(&w_lo).unwrap()[0]);
        }
    }
}
