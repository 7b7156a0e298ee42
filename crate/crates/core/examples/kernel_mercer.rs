// Affinities from the three kernels on the same points, and a Mercer check of
// the density-weighted kernel's Gram matrix.

use std::error::Error;

use ktsne::density::{DbscanParams, DensityProfile};
use ktsne::distance::PairwiseDistances;
use ktsne::kernel::{
    calibrate_bandwidths, gaussian_affinity, isolation_affinity, mik_affinity, mik_gram, validate_mercer, IsolationParams,
};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0)?;
    let x = Array2::from_shape_fn((40, 5), |(i, _)| normal.sample(&mut rng) + if i < 20 { 0.0 } else { 4.0 });
    let d = PairwiseDistances::from_points(x.view());

    let bw = calibrate_bandwidths(&d, 10.0)?;
    let gaussian = gaussian_affinity(&d, &bw)?;
    // psi defaults to 64 clipped to n, which for 40 points puts every point in
    // its own cell; a smaller sample gives cells worth comparing
    let isolation = isolation_affinity(&d, &IsolationParams { psi: 8, rounds: 200, seed: 0 })?;
    let density = DensityProfile::fit(&d, &DbscanParams::resolve(&d, None, None)?)?;
    let mik = mik_affinity(&d, &bw, &density)?;

    for a in [&gaussian, &isolation, &mik] {
        println!(
            "{:<9} A[0,1] {:.4}  A[0,39] {:.2e}  asymmetry {:.1e}",
            a.kernel.to_string(),
            a.values[[0, 1]],
            a.values[[0, 39]],
            a.max_asymmetry()
        );
    }

    let gram = mik_gram(&d, &bw, &density)?;
    let bound = density.p.iter().map(|p| 1.0 / p).fold(0.0, f64::max);
    let report = validate_mercer(&gram, Some(bound))?;
    println!(
        "mik gram: asymmetry {:.1e}, min eigenvalue {:.3e}, max entry {:.3} (bound {bound:.3})",
        report.max_asymmetry, report.min_eigenvalue, report.max_entry
    );
    assert!(report.is_symmetric(1e-12) && report.is_psd(1e-8));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
