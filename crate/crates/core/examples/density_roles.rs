// DBSCAN roles on two blobs plus stragglers, and the density profile MIK uses.

use std::error::Error;

use ktsne::density::{dbscan, DbscanParams, DensityProfile, Role};
use ktsne::distance::PairwiseDistances;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = Array2::zeros((44, 2));
    for i in 0..40 {
        let c = if i < 20 { 0.0 } else { 5.0 };
        x[[i, 0]] = c + rng.random_range(-0.5..0.5);
        x[[i, 1]] = c + rng.random_range(-0.5..0.5);
    }
    for (i, (a, b)) in [(10.0, -3.0), (-4.0, 8.0), (2.5, 2.5), (12.0, 12.0)].into_iter().enumerate() {
        x[[40 + i, 0]] = a;
        x[[40 + i, 1]] = b;
    }

    let d = PairwiseDistances::from_points(x.view());
    let params = DbscanParams::new(0.6, 4)?;
    let result = dbscan(&d, &params);
    let count = |r: Role| result.roles.iter().filter(|x| **x == r).count();
    println!(
        "{} clusters: {} core, {} border, {} noise",
        result.n_clusters,
        count(Role::Core),
        count(Role::Border),
        count(Role::Noise)
    );

    let profile = DensityProfile::fit(&d, &params)?;
    for i in [0, 40] {
        println!(
            "point {i:>2}: {:<6} weight {:<6} p {:.5} correction {:.5}",
            profile.roles[i].to_string(),
            profile.weights[i],
            profile.p[i],
            profile.correction(i)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
