use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::{EmbedParams, EmbeddingMethod, DEFAULT_PSEUDOCOUNT, DEFAULT_SPACED_G};
use crate::eval::{EvalConfig, DEFAULT_KNN_K, DEFAULT_MAX_K, DEFAULT_RESTARTS, DEFAULT_TEST_FRACTION};
use crate::init::InitMethod;
use crate::kernel::{KernelKind, DEFAULT_ROUNDS};
use crate::seqio::{AlphabetKind, SynthSpec};
use crate::tsne::{OptimizerConfig, PipelineConfig};

/// `<classes>x<per_class>`, e.g. `3x100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct SynthShape {
    pub classes: usize,
    pub per_class: usize,
}

impl fmt::Display for SynthShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.classes, self.per_class)
    }
}

impl FromStr for SynthShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("synthetic shape `{s}` must look like 3x100");
        let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let classes = a.trim().parse().map_err(|_| bad())?;
        let per_class = b.trim().parse().map_err(|_| bad())?;
        if classes == 0 || per_class == 0 {
            return Err(bad());
        }
        Ok(Self { classes, per_class })
    }
}

impl From<SynthShape> for String {
    fn from(s: SynthShape) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SynthShape {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Every setting of every command. Values come from defaults, then an
/// optional `key = value` file, then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub synth: Option<SynthShape>,
    pub length: usize,
    pub mutation: f64,
    pub alphabet: AlphabetKind,
    pub allow_gap: bool,

    pub method: EmbeddingMethod,
    /// Per-method default when absent.
    pub k: Option<usize>,
    pub g: usize,
    pub pseudocount: f64,
    pub standardize: bool,

    pub kernel: KernelKind,
    pub init: InitMethod,
    pub dims: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub epsilon: Option<f64>,
    pub min_samples: Option<usize>,
    pub psi: Option<usize>,
    pub t: usize,
    pub seed: u64,

    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub max_k: usize,
    pub n_clusters: Option<usize>,
    pub elbow: bool,
    pub restarts: usize,
    pub knn_k: usize,
    pub test_fraction: f64,

    pub kernels: Vec<KernelKind>,
    pub inits: Vec<InitMethod>,
    pub methods: Vec<EmbeddingMethod>,
    pub repeats: usize,

    pub dump_affinity: bool,
    pub timings: bool,
    /// Output directory; not part of the echoed configuration.
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        Self {
            input: None,
            features: None,
            synth: None,
            length: 60,
            mutation: 0.05,
            alphabet: AlphabetKind::Amino,
            allow_gap: false,
            method: EmbeddingMethod::Spike2vec,
            k: None,
            g: DEFAULT_SPACED_G,
            pseudocount: DEFAULT_PSEUDOCOUNT,
            standardize: false,
            kernel: KernelKind::Gaussian,
            init: InitMethod::Random,
            dims: 2,
            perplexity: 30.0,
            iterations: opt.iterations,
            learning_rate: opt.learning_rate,
            momentum: opt.initial_momentum,
            final_momentum: opt.final_momentum,
            momentum_switch: opt.momentum_switch,
            exaggeration: opt.exaggeration,
            exaggeration_iters: opt.exaggeration_iters,
            epsilon: None,
            min_samples: None,
            psi: None,
            t: DEFAULT_ROUNDS,
            seed: 0,
            x: None,
            y: None,
            labels: None,
            max_k: DEFAULT_MAX_K,
            n_clusters: None,
            elbow: false,
            restarts: DEFAULT_RESTARTS,
            knn_k: DEFAULT_KNN_K,
            test_fraction: DEFAULT_TEST_FRACTION,
            kernels: KernelKind::ALL.to_vec(),
            inits: InitMethod::ALL.to_vec(),
            methods: EmbeddingMethod::COMPUTED.to_vec(),
            repeats: 1,
            dump_affinity: false,
            timings: false,
            out: PathBuf::from("."),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.trim().parse().map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got `{value}`")),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("{key}: empty list"));
    }
    Ok(items)
}

fn path(value: &str) -> Option<PathBuf> {
    Some(PathBuf::from(value.trim()))
}

impl RunConfig {
    /// Sets one value by key. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let k = key.trim().replace('-', "_");
        let key = k.as_str();
        match key {
            "input" => self.input = path(value),
            "features" => self.features = path(value),
            "synth" => self.synth = Some(parse(key, value)?),
            "length" => self.length = parse(key, value)?,
            "mutation" => self.mutation = parse(key, value)?,
            "alphabet" => self.alphabet = parse(key, value)?,
            "allow_gap" => self.allow_gap = parse_bool(key, value)?,
            "method" => self.method = parse(key, value)?,
            "k" => self.k = Some(parse(key, value)?),
            "g" => self.g = parse(key, value)?,
            "pseudocount" => self.pseudocount = parse(key, value)?,
            "standardize" => self.standardize = parse_bool(key, value)?,
            "kernel" => self.kernel = parse(key, value)?,
            "init" => self.init = parse(key, value)?,
            "dims" => self.dims = parse(key, value)?,
            "perplexity" => self.perplexity = parse(key, value)?,
            "iterations" => self.iterations = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "final_momentum" => self.final_momentum = parse(key, value)?,
            "momentum_switch" => self.momentum_switch = parse(key, value)?,
            "exaggeration" => self.exaggeration = parse(key, value)?,
            "exaggeration_iters" => self.exaggeration_iters = parse(key, value)?,
            "epsilon" => self.epsilon = Some(parse(key, value)?),
            "min_samples" => self.min_samples = Some(parse(key, value)?),
            "psi" => self.psi = Some(parse(key, value)?),
            "t" | "rounds" => self.t = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "x" => self.x = path(value),
            "y" => self.y = path(value),
            "labels" => self.labels = path(value),
            "max_k" => self.max_k = parse(key, value)?,
            "n_clusters" => self.n_clusters = Some(parse(key, value)?),
            "elbow" => self.elbow = parse_bool(key, value)?,
            "restarts" => self.restarts = parse(key, value)?,
            "knn_k" => self.knn_k = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "kernels" => self.kernels = parse_list(key, value)?,
            "inits" => self.inits = parse_list(key, value)?,
            "methods" => self.methods = parse_list(key, value)?,
            "repeats" => self.repeats = parse(key, value)?,
            "dump_affinity" => self.dump_affinity = parse_bool(key, value)?,
            "timings" => self.timings = parse_bool(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            _ => return Err(format!("unknown setting `{key}`")),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<(), String> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{}, line {}: expected `key = value`", origin.display(), no + 1))?;
            self.set(key, value)
                .map_err(|e| format!("{}, line {}: {e}", origin.display(), no + 1))?;
        }
        Ok(())
    }

    /// Range checks that do not depend on the data.
    pub fn validate(&self) -> Result<(), String> {
        if self.dims == 0 {
            return Err("dims must be at least 1".into());
        }
        if self.repeats == 0 {
            return Err("repeats must be at least 1".into());
        }
        if self.t == 0 {
            return Err("t (isolation rounds) must be at least 1".into());
        }
        if self.max_k == 0 || self.knn_k == 0 {
            return Err("max_k and knn_k must be at least 1".into());
        }
        if !(self.perplexity > 1.0 && self.perplexity.is_finite()) {
            return Err(format!("perplexity must exceed 1, got {}", self.perplexity));
        }
        self.optimizer().validate().map_err(|e| e.to_string())
    }

    pub fn embed_params(&self, method: EmbeddingMethod) -> EmbedParams {
        let mut p = EmbedParams::for_method(method);
        if let Some(k) = self.k {
            p.k = k;
        }
        p.g = self.g;
        p.pseudocount = self.pseudocount;
        p.standardize = self.standardize;
        p
    }

    pub fn synth_spec(&self) -> Option<SynthSpec> {
        self.synth.map(|s| {
            SynthSpec::new(s.classes, s.per_class, self.length, self.mutation, self.seed).with_alphabet(self.alphabet)
        })
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            iterations: self.iterations,
            learning_rate: self.learning_rate,
            initial_momentum: self.momentum,
            final_momentum: self.final_momentum,
            momentum_switch: self.momentum_switch,
            exaggeration: self.exaggeration,
            exaggeration_iters: self.exaggeration_iters,
            ..OptimizerConfig::default()
        }
    }

    pub fn pipeline(&self, kernel: KernelKind, init: InitMethod, seed: u64) -> PipelineConfig {
        PipelineConfig {
            kernel,
            init,
            dims: self.dims,
            perplexity: self.perplexity,
            optimizer: self.optimizer(),
            epsilon: self.epsilon,
            min_samples: self.min_samples,
            psi: self.psi,
            rounds: self.t,
            seed,
        }
    }

    pub fn eval_config(&self, seed: u64) -> EvalConfig {
        EvalConfig {
            max_k: self.max_k,
            n_clusters: self.n_clusters,
            elbow: self.elbow,
            restarts: self.restarts,
            knn_k: self.knn_k,
            test_fraction: self.test_fraction,
            seed,
        }
    }
}
