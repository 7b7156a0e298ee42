use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::EvalError;
use crate::distance::squared_euclidean;

pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_TEST_FRACTION: f64 = 0.3;

/// Majority vote among the k nearest training points (ties in distance go to
/// the lower training index). Vote ties go to the label with the smaller
/// summed distance, then to the lexicographically smaller label.
pub fn knn_classify(
    train: ArrayView2<'_, f64>,
    train_labels: &[String],
    test: ArrayView2<'_, f64>,
    k: usize,
) -> Result<Vec<String>, EvalError> {
    let n_train = train.nrows();
    if train_labels.len() != n_train {
        return Err(EvalError::SizeMismatch {
            high: n_train,
            low: train_labels.len(),
        });
    }
    if train.ncols() != test.ncols() {
        return Err(EvalError::SizeMismatch {
            high: train.ncols(),
            low: test.ncols(),
        });
    }
    if k == 0 || k > n_train {
        return Err(EvalError::BadK {
            k,
            n: n_train,
            reason: "k-NN needs 1 <= k <= training size",
        });
    }
    let train_rows: Vec<Vec<f64>> = train.rows().into_iter().map(|r| r.to_vec()).collect();
    let predictions = (0..test.nrows())
        .into_par_iter()
        .map(|t| {
            let q = test.row(t).to_vec();
            let mut order: Vec<(f64, usize)> =
                train_rows.iter().enumerate().map(|(i, r)| (squared_euclidean(&q, r), i)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
            for &(d2, i) in &order[..k] {
                let v = votes.entry(train_labels[i].as_str()).or_insert((0, 0.0));
                v.0 += 1;
                v.1 += d2.sqrt();
            }
            // BTreeMap iterates labels in lexicographic order, so a strict
            // comparison keeps the smaller label on full ties
            let mut best: Option<(&str, usize, f64)> = None;
            for (label, (count, dist)) in votes {
                let better = match best {
                    None => true,
                    Some((_, bc, bd)) => count > bc || (count == bc && dist < bd),
                };
                if better {
                    best = Some((label, count, dist));
                }
            }
            best.expect("k >= 1").0.to_string()
        })
        .collect();
    Ok(predictions)
}

pub fn accuracy(predicted: &[String], truth: &[String]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / predicted.len() as f64
}

/// Seeded shuffle split into sorted (train, test) index lists; the test part
/// gets `round(n · fraction)` points, at least one, leaving at least one to train.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if n < 2 {
        return Err(EvalError::TooFewPoints { n, needed: 2 });
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadFraction(test_fraction));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
