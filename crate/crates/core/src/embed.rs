//! Fixed-length numeric embeddings of sequences.
//!
//! All three methods produce a |Σ|^k spectrum indexed by k-mer, where a k-mer
//! `s_0 s_1 .. s_{k-1}` maps to `Σ_t idx(s_t) · |Σ|^(k-1-t)` over the corpus
//! alphabet order.

use std::fmt;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqio::{Alphabet, Corpus};

/// Spectra wider than this are refused rather than allocated.
pub const MAX_DIMENSION: usize = 1 << 24;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_SPACED_K: usize = 4;
pub const DEFAULT_SPACED_G: usize = 9;
pub const DEFAULT_PSEUDOCOUNT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMethod {
    Spike2vec,
    Spaced,
    Pwm2vec,
    /// Features read from a file rather than computed here.
    External,
}

impl EmbeddingMethod {
    pub const COMPUTED: [EmbeddingMethod; 3] =
        [EmbeddingMethod::Spike2vec, EmbeddingMethod::Spaced, EmbeddingMethod::Pwm2vec];
}

impl fmt::Display for EmbeddingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMethod::Spike2vec => "spike2vec",
            EmbeddingMethod::Spaced => "spaced",
            EmbeddingMethod::Pwm2vec => "pwm2vec",
            EmbeddingMethod::External => "external",
        })
    }
}

impl std::str::FromStr for EmbeddingMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spike2vec" | "kmer" => Ok(EmbeddingMethod::Spike2vec),
            "spaced" | "spaced-kmers" | "spaced_kmers" => Ok(EmbeddingMethod::Spaced),
            "pwm2vec" | "pwm" => Ok(EmbeddingMethod::Pwm2vec),
            "external" => Ok(EmbeddingMethod::External),
            other => Err(format!("unknown embedding method `{other}`")),
        }
    }
}

/// n×d matrix of point features, rows aligned with `point_ids` and `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub point_ids: Vec<String>,
    pub labels: Vec<String>,
    pub method: EmbeddingMethod,
}

impl FeatureMatrix {
    pub fn new(
        values: Array2<f64>,
        point_ids: Vec<String>,
        labels: Vec<String>,
        method: EmbeddingMethod,
    ) -> Result<Self, EmbedError> {
        let n = values.nrows();
        if point_ids.len() != n || labels.len() != n {
            return Err(EmbedError::Shape(format!(
                "{n} rows but {} ids and {} labels",
                point_ids.len(),
                labels.len()
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(EmbedError::NonFinite { row: i, col: j, value: *v });
        }
        Ok(Self {
            values,
            point_ids,
            labels,
            method,
        })
    }

    /// Unlabeled matrix with ids `p0..p{n-1}`.
    pub fn from_values(values: Array2<f64>) -> Self {
        let n = values.nrows();
        Self {
            values,
            point_ids: (0..n).map(|i| format!("p{i}")).collect(),
            labels: vec![crate::seqio::UNLABELED.to_string(); n],
            method: EmbeddingMethod::External,
        }
    }

    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Column standardization to mean 0 / variance 1 (population variance).
    /// Constant columns become all-zero.
    pub fn standardize(&mut self) {
        let n = self.values.nrows();
        if n == 0 {
            return;
        }
        for mut col in self.values.axis_iter_mut(Axis(1)) {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                let sd = var.sqrt();
                col.mapv_inplace(|v| (v - mean) / sd);
            } else {
                col.fill(0.0);
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("sequence `{id}` has length {length}, shorter than the window {window}")]
    SequenceTooShort { id: String, length: usize, window: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("gapped window g = {g} must exceed k = {k}")]
    GapNotLarger { k: usize, g: usize },
    #[error("pseudocount must be positive and finite, got {0}")]
    BadPseudocount(f64),
    #[error("spectrum dimension {alphabet}^{k} exceeds the limit of {MAX_DIMENSION}")]
    DimensionTooLarge { alphabet: usize, k: usize },
    #[error("residue `{symbol}` of `{id}` is not in the corpus alphabet")]
    UnknownSymbol { id: String, symbol: char },
    #[error("feature matrix shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite feature {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },
}

/// |Σ|^k, or an error if it would not fit.
pub fn spectrum_dim(alphabet: &Alphabet, k: usize) -> Result<usize, EmbedError> {
    if k == 0 {
        return Err(EmbedError::ZeroK);
    }
    let base = alphabet.size();
    (0..k)
        .try_fold(1usize, |acc, _| acc.checked_mul(base).filter(|&d| d <= MAX_DIMENSION))
        .ok_or(EmbedError::DimensionTooLarge { alphabet: base, k })
}

fn encode(id: &str, residues: &str, alphabet: &Alphabet) -> Result<Vec<usize>, EmbedError> {
    residues
        .bytes()
        .map(|b| {
            alphabet.index_of(b).ok_or_else(|| EmbedError::UnknownSymbol {
                id: id.to_string(),
                symbol: b as char,
            })
        })
        .collect()
}

fn kmer_index(symbols: &[usize], base: usize) -> usize {
    symbols.iter().fold(0, |acc, &s| acc * base + s)
}

fn check_lengths(corpus: &Corpus, window: usize) -> Result<(), EmbedError> {
    match corpus.records.iter().find(|r| r.residues.len() < window) {
        Some(r) => Err(EmbedError::SequenceTooShort {
            id: r.id.clone(),
            length: r.residues.len(),
            window,
        }),
        None => Ok(()),
    }
}

/// Runs `row_fn` on every record in parallel and stacks the rows in record order.
fn build_rows<F>(corpus: &Corpus, dim: usize, method: EmbeddingMethod, row_fn: F) -> Result<FeatureMatrix, EmbedError>
where
    F: Fn(&[usize], &mut [f64]) + Sync,
{
    let alphabet = &corpus.alphabet;
    let rows: Vec<Vec<f64>> = corpus
        .records
        .par_iter()
        .map(|r| {
            let symbols = encode(&r.id, &r.residues, alphabet)?;
            let mut row = vec![0.0; dim];
            row_fn(&symbols, &mut row);
            Ok(row)
        })
        .collect::<Result<_, EmbedError>>()?;
    let mut values = Array2::zeros((rows.len(), dim));
    for (mut dst, src) in values.axis_iter_mut(Axis(0)).zip(rows) {
        dst.assign(&ndarray::ArrayView1::from(&src));
    }
    FeatureMatrix::new(values, corpus.ids(), corpus.labels(), method)
}

/// k-mer count spectrum over sliding windows of length `k`.
pub fn spike2vec(corpus: &Corpus, k: usize) -> Result<FeatureMatrix, EmbedError> {
    let dim = spectrum_dim(&corpus.alphabet, k)?;
    check_lengths(corpus, k)?;
    let base = corpus.alphabet.size();
    build_rows(corpus, dim, EmbeddingMethod::Spike2vec, |symbols, row| {
        for window in symbols.windows(k) {
            row[kmer_index(window, base)] += 1.0;
        }
    })
}

/// Gapped k-mers: from every length-`g` window keep the leading `k` residues
/// (in sequence order) and count them.
pub fn spaced_kmers(corpus: &Corpus, k: usize, g: usize) -> Result<FeatureMatrix, EmbedError> {
    let dim = spectrum_dim(&corpus.alphabet, k)?;
    if g <= k {
        return Err(EmbedError::GapNotLarger { k, g });
    }
    check_lengths(corpus, g)?;
    let base = corpus.alphabet.size();
    build_rows(corpus, dim, EmbeddingMethod::Spaced, |symbols, row| {
        for window in symbols.windows(g) {
            row[kmer_index(&window[..k], base)] += 1.0;
        }
    })
}

/// Position-weight-matrix scored k-mer spectrum.
///
/// For each sequence a |Σ|×k PWM is estimated from its own k-mers with an
/// additive pseudocount; every k-mer occurrence adds `Σ_t PWM[s_t][t]` to its
/// spectrum bin.
pub fn pwm2vec(corpus: &Corpus, k: usize, pseudocount: f64) -> Result<FeatureMatrix, EmbedError> {
    let dim = spectrum_dim(&corpus.alphabet, k)?;
    if !(pseudocount > 0.0 && pseudocount.is_finite()) {
        return Err(EmbedError::BadPseudocount(pseudocount));
    }
    check_lengths(corpus, k)?;
    let base = corpus.alphabet.size();
    build_rows(corpus, dim, EmbeddingMethod::Pwm2vec, |symbols, row| {
        let pwm = position_weights(symbols, k, base, pseudocount);
        for window in symbols.windows(k) {
            let score: f64 = window
                .iter()
                .enumerate()
                .map(|(t, &s)| pwm[s * k + t])
                .sum();
            row[kmer_index(window, base)] += score;
        }
    })
}

/// Column-stochastic |Σ|×k matrix (row-major, symbol-major) of smoothed
/// positional frequencies over the sequence's k-mers.
fn position_weights(symbols: &[usize], k: usize, base: usize, pseudocount: f64) -> Vec<f64> {
    let windows = symbols.len() + 1 - k;
    let mut counts = vec![0.0; base * k];
    for window in symbols.windows(k) {
        for (t, &s) in window.iter().enumerate() {
            counts[s * k + t] += 1.0;
        }
    }
    let denom = windows as f64 + pseudocount * base as f64;
    counts.iter().map(|c| (c + pseudocount) / denom).collect()
}

/// Dispatches on `method` with the given window parameters.
pub fn embed_corpus(corpus: &Corpus, params: &EmbedParams) -> Result<FeatureMatrix, EmbedError> {
    let mut fm = match params.method {
        EmbeddingMethod::Spike2vec => spike2vec(corpus, params.k),
        EmbeddingMethod::Spaced => spaced_kmers(corpus, params.k, params.g),
        EmbeddingMethod::Pwm2vec => pwm2vec(corpus, params.k, params.pseudocount),
        EmbeddingMethod::External => Err(EmbedError::Shape("external features cannot be computed from a corpus".into())),
    }?;
    if params.standardize {
        fm.standardize();
    }
    Ok(fm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub method: EmbeddingMethod,
    pub k: usize,
    pub g: usize,
    pub pseudocount: f64,
    pub standardize: bool,
}

impl EmbedParams {
    /// Method defaults: k = 3 for spike2vec / pwm2vec, (k, g) = (4, 9) for spaced k-mers.
    pub fn for_method(method: EmbeddingMethod) -> Self {
        let k = match method {
            EmbeddingMethod::Spaced => DEFAULT_SPACED_K,
            _ => DEFAULT_K,
        };
        Self {
            method,
            k,
            g: DEFAULT_SPACED_G,
            pseudocount: DEFAULT_PSEUDOCOUNT,
            standardize: false,
        }
    }
}
