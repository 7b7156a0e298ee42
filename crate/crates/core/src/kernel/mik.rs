use ndarray::Array2;

use super::{AffinityMatrix, BandwidthProfile, KernelError, KernelKind};
use crate::density::DensityProfile;
use crate::distance::PairwiseDistances;

/// Modified isolation kernel with a zero diagonal, for the t-SNE path:
///
/// `A_ij = (p_i p_j)^{-1/2} · exp(-‖x_i - x_j‖² / (2σ_iσ_j)) · c_i · c_j`
///
/// where `c_i = 1 - n_i / Σ_{k≠i} n_k` is the density correction of point i.
/// Each unordered pair is evaluated once and mirrored, so the matrix is
/// exactly symmetric.
pub fn mik_affinity(
    distances: &PairwiseDistances,
    bw: &BandwidthProfile,
    density: &DensityProfile,
) -> Result<AffinityMatrix, KernelError> {
    let mut values = mik_values(distances, bw, density)?;
    values.diag_mut().fill(0.0);
    Ok(AffinityMatrix {
        values,
        kernel: KernelKind::Mik,
    })
}

/// The MIK Gram matrix with its natural diagonal `c_i² / p_i`, i.e. the
/// kernel evaluated at `(x_i, x_i)`. Used for Mercer checks.
pub fn mik_gram(
    distances: &PairwiseDistances,
    bw: &BandwidthProfile,
    density: &DensityProfile,
) -> Result<Array2<f64>, KernelError> {
    mik_values(distances, bw, density)
}

/// Elementwise log of [`mik_affinity`], `-inf` on the diagonal:
/// `ln s_i + ln s_j - ‖x_i - x_j‖² / (2σ_iσ_j)` with `s_i = c_i / √p_i`.
/// Used to normalize rows without underflow.
pub fn mik_log_affinity(
    distances: &PairwiseDistances,
    bw: &BandwidthProfile,
    density: &DensityProfile,
) -> Result<Array2<f64>, KernelError> {
    let n = distances.len();
    let log_scale: Vec<f64> = mik_scale(distances, bw, density)?.iter().map(|s| s.ln()).collect();
    let mut values = Array2::from_elem((n, n), f64::NEG_INFINITY);
    for i in 0..n {
        for j in i + 1..n {
            let v = log_scale[i] + log_scale[j] - distances.squared(i, j) / (2.0 * bw.sigma[i] * bw.sigma[j]);
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(values)
}

fn mik_values(
    distances: &PairwiseDistances,
    bw: &BandwidthProfile,
    density: &DensityProfile,
) -> Result<Array2<f64>, KernelError> {
    let n = distances.len();
    let scale = mik_scale(distances, bw, density)?;
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        values[[i, i]] = scale[i] * scale[i];
        for j in i + 1..n {
            let gauss = (-distances.squared(i, j) / (2.0 * bw.sigma[i] * bw.sigma[j])).exp();
            let v = scale[i] * scale[j] * gauss;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(values)
}

/// Per-point factor `s_i = c_i / √p_i`.
fn mik_scale(distances: &PairwiseDistances, bw: &BandwidthProfile, density: &DensityProfile) -> Result<Vec<f64>, KernelError> {
    let n = distances.len();
    if n < 3 {
        return Err(KernelError::TooFewPoints(n));
    }
    if bw.len() != n || density.len() != n {
        return Err(KernelError::SizeMismatch(format!(
            "{n} points, {} bandwidths, {} density entries",
            bw.len(),
            density.len()
        )));
    }
    let correction: Vec<f64> = (0..n).map(|i| density.correction(i)).collect();
    if let Some((index, &value)) = correction.iter().enumerate().find(|(_, c)| **c < 0.0) {
        return Err(KernelError::NegativeCorrection { index, value });
    }
    Ok((0..n).map(|i| correction[i] / density.p[i].sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Role;
    use crate::kernel::{gaussian_affinity, max_asymmetry};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(seed: u64, n: usize, dim: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, dim), |_| rng.random_range(-2.0..2.0))
    }

    /// Direct evaluation of the kernel formula for one pair.
    fn mik_entry(d: &PairwiseDistances, bw: &BandwidthProfile, w: &[f64], i: usize, j: usize) -> f64 {
        let others = |k: usize| w.iter().enumerate().filter(|(m, _)| *m != k).map(|(_, v)| v).sum::<f64>();
        let p = |k: usize| 1.0 / (w[k] * others(k)).sqrt();
        (1.0 / (p(i) * p(j)).sqrt())
            * (-d.squared(i, j) / (2.0 * bw.sigma[i] * bw.sigma[j])).exp()
            * (1.0 - w[i] / others(i))
            * (1.0 - w[j] / others(j))
    }

    #[test]
    fn matches_formula_and_is_symmetric() {
        let x = random_points(1, 9, 3);
        let d = PairwiseDistances::from_points(x.view());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bw = BandwidthProfile {
            sigma: (0..9).map(|_| rng.random_range(0.5..2.0)).collect(),
            ..BandwidthProfile::uniform(9, 1.0)
        };
        let roles = [Role::Core, Role::Border, Role::Noise, Role::Core, Role::Core, Role::Border, Role::Core, Role::Noise, Role::Core];
        let dp = DensityProfile::from_roles(roles.to_vec()).unwrap();
        let a = mik_affinity(&d, &bw, &dp).unwrap();
        assert_eq!(max_asymmetry(&a.values), 0.0);
        for i in 0..9 {
            assert_eq!(a.values[[i, i]], 0.0);
            for j in 0..9 {
                if i != j {
                    let expect = mik_entry(&d, &bw, &dp.weights, i, j);
                    assert!((a.values[[i, j]] - expect).abs() <= 1e-14 * expect.max(1.0));
                    assert_eq!(a.values[[i, j]].to_bits(), a.values[[j, i]].to_bits());
                }
            }
        }
    }

    #[test]
    fn uniform_weights_preserve_gaussian_row_order() {
        let x = random_points(3, 15, 4);
        let d = PairwiseDistances::from_points(x.view());
        let bw = BandwidthProfile::uniform(15, 1.3);
        let dp = DensityProfile::from_roles(vec![Role::Core; 15]).unwrap();
        let mik = mik_affinity(&d, &bw, &dp).unwrap();
        let gauss = gaussian_affinity(&d, &bw).unwrap();
        let ratio = mik.values[[0, 1]] / gauss.values[[0, 1]];
        for i in 0..15 {
            let order = |m: &Array2<f64>| {
                let mut idx: Vec<usize> = (0..15).filter(|&j| j != i).collect();
                idx.sort_by(|&a, &b| m[[i, b]].total_cmp(&m[[i, a]]).then(a.cmp(&b)));
                idx
            };
            assert_eq!(order(&mik.values), order(&gauss.values));
            for j in 0..15 {
                if j != i {
                    assert!((mik.values[[i, j]] / gauss.values[[i, j]] / ratio - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn duplicates_hit_row_maximum() {
        let mut x = random_points(4, 8, 2);
        let first = x.row(0).to_owned();
        x.row_mut(5).assign(&first);
        let d = PairwiseDistances::from_points(x.view());
        let bw = BandwidthProfile::uniform(8, 0.8);
        let dp = DensityProfile::from_roles(vec![Role::Core; 8]).unwrap();
        let a = mik_affinity(&d, &bw, &dp).unwrap();
        let row_max = a.values.row(0).iter().copied().fold(0.0, f64::max);
        assert_eq!(a.values[[0, 5]], row_max);
        assert!((a.values[[0, 5]] - dp.correction(0).powi(2) / dp.p[0]).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_inputs_and_negative_corrections() {
        let x = random_points(5, 2, 2);
        let d = PairwiseDistances::from_points(x.view());
        let dp = DensityProfile::from_roles(vec![Role::Core; 2]).unwrap();
        assert_eq!(
            mik_affinity(&d, &BandwidthProfile::uniform(2, 1.0), &dp),
            Err(KernelError::TooFewPoints(2))
        );
        let x = random_points(5, 3, 2);
        let d = PairwiseDistances::from_points(x.view());
        let dp = DensityProfile::from_roles(vec![Role::Core, Role::Border, Role::Noise]).unwrap();
        assert!(matches!(
            mik_affinity(&d, &BandwidthProfile::uniform(3, 1.0), &dp),
            Err(KernelError::NegativeCorrection { index: 0, .. })
        ));
    }

    #[test]
    fn entries_bounded_by_inverse_density() {
        let x = random_points(6, 20, 3);
        let d = PairwiseDistances::from_points(x.view());
        let mut roles = vec![Role::Core; 20];
        roles[3] = Role::Noise;
        roles[7] = Role::Border;
        let dp = DensityProfile::from_roles(roles).unwrap();
        let g = mik_gram(&d, &BandwidthProfile::uniform(20, 0.5), &dp).unwrap();
        let bound = dp.p.iter().map(|p| 1.0 / p).fold(0.0, f64::max);
        assert!(g.iter().all(|&v| v >= 0.0 && v <= bound));
    }
}
