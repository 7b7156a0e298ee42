//! Batch command-line front end: `embed | tsne | eval | compare | synth`.
//!
//! Settings resolve in three layers: built-in defaults, an optional
//! `--config` file of `key = value` lines, then flags given on the command
//! line. Exit codes: 0 success, 1 usage, 2 data, 3 numeric divergence.

mod commands;
mod config;
mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{Args, CommandFactory, Parser, Subcommand};
use thiserror::Error;

pub use commands::TREND_KS;
pub use config::{RunConfig, SynthShape};
pub use svg::{nice_ticks, scatter_svg, PALETTE};

use crate::density::DensityError;
use crate::embed::EmbedError;
use crate::eval::EvalError;
use crate::init::InitError;
use crate::io::IoError;
use crate::kernel::KernelError;
use crate::seqio::SeqError;
use crate::tsne::TsneError;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Diverged(_) => EXIT_DIVERGED,
        }
    }
}

impl From<SeqError> for CliError {
    fn from(e: SeqError) -> Self {
        match e {
            SeqError::InvalidSynthParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::ZeroK
            | EmbedError::GapNotLarger { .. }
            | EmbedError::BadPseudocount(_)
            | EmbedError::DimensionTooLarge { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::BadK { .. } | EvalError::BadFraction(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TsneError> for CliError {
    fn from(e: TsneError) -> Self {
        let usage = match &e {
            TsneError::Diverged { .. } => return CliError::Diverged(e.to_string()),
            TsneError::BadConfig(_) => true,
            TsneError::Kernel(k) => matches!(
                k,
                KernelError::BadPerplexity { .. } | KernelError::BadPsi { .. } | KernelError::ZeroRounds
            ),
            TsneError::Init(i) => matches!(i, InitError::ZeroDims | InitError::TooManyComponents { .. }),
            TsneError::Density(d) => matches!(d, DensityError::BadEpsilon(_) | DensityError::BadMinSamples),
            _ => false,
        };
        if usage {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(name = "ktsne", version, about = "Kernelized t-SNE for biological sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled corpus to synth.fasta
    Synth(SynthCmd),
    /// Compute k-mer feature vectors and write embedding.csv
    Embed(EmbedCmd),
    /// Run t-SNE and write Y.csv, trace.json and scatter.svg
    Tsne(TsneCmd),
    /// Score a layout against its features: metrics.json and curve CSVs
    Eval(EvalCmd),
    /// Run every kernel × init × embedding cell and write summary.csv
    Compare(CompareCmd),
}

#[derive(Args)]
struct Common {
    /// `key = value` settings file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct InputArgs {
    /// FASTA file with `>id|label` headers
    #[arg(long)]
    input: Option<String>,
    /// Synthetic corpus shape, e.g. 3x100
    #[arg(long)]
    synth: Option<String>,
    /// Synthetic sequence length
    #[arg(long)]
    length: Option<String>,
    /// Synthetic per-site mutation rate
    #[arg(long)]
    mutation: Option<String>,
    /// amino or nucleotide
    #[arg(long)]
    alphabet: Option<String>,
    /// Accept `-` as a residue
    #[arg(long)]
    allow_gap: bool,
}

#[derive(Args)]
struct EmbedArgs {
    /// spike2vec, spaced or pwm2vec
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// Spaced k-mer window
    #[arg(long)]
    g: Option<String>,
    /// PWM pseudocount
    #[arg(long)]
    pseudocount: Option<String>,
    /// Standardize feature columns
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct TsneArgs {
    /// gaussian, isolation or mik
    #[arg(long)]
    kernel: Option<String>,
    /// random, pca or walk
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    perplexity: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    /// Momentum before the switch
    #[arg(long)]
    momentum: Option<String>,
    /// Momentum from the switch on
    #[arg(long)]
    final_momentum: Option<String>,
    /// Zero-based iteration of the momentum switch
    #[arg(long)]
    momentum_switch: Option<String>,
    #[arg(long)]
    exaggeration: Option<String>,
    #[arg(long)]
    exaggeration_iters: Option<String>,
    /// DBSCAN radius (default: half the median pairwise distance)
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    min_samples: Option<String>,
    /// Isolation sample size
    #[arg(long)]
    psi: Option<String>,
    /// Isolation rounds
    #[arg(long = "t")]
    t: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Largest neighborhood size of the curves
    #[arg(long)]
    max_k: Option<String>,
    /// k-means cluster count (default: number of labels)
    #[arg(long)]
    n_clusters: Option<String>,
    /// Choose the cluster count with the elbow method
    #[arg(long)]
    elbow: bool,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    knn_k: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
}

#[derive(Args)]
struct SynthCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct EmbedCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct TsneCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    /// Precomputed feature CSV instead of sequences
    #[arg(long)]
    features: Option<String>,
    #[command(flatten)]
    embed: EmbedArgs,
    #[command(flatten)]
    tsne: TsneArgs,
    /// Also write the dense affinity matrix
    #[arg(long)]
    dump_affinity: bool,
    /// Record wall-clock time in trace.json
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct EvalCmd {
    #[command(flatten)]
    common: Common,
    /// High-dimensional features CSV
    #[arg(long)]
    x: Option<String>,
    /// Layout CSV
    #[arg(long)]
    y: Option<String>,
    /// `id,label` CSV (default: labels of the features file)
    #[arg(long)]
    labels: Option<String>,
    #[command(flatten)]
    eval: EvalArgs,
}

#[derive(Args)]
struct CompareCmd {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    embed: EmbedArgs,
    #[command(flatten)]
    tsne: TsneArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// Comma-separated kernels
    #[arg(long)]
    kernels: Option<String>,
    /// Comma-separated initializations
    #[arg(long)]
    inits: Option<String>,
    /// Comma-separated embedding methods
    #[arg(long)]
    methods: Option<String>,
    /// Seeds per cell
    #[arg(long)]
    repeats: Option<String>,
}

/// Parses arguments and builds the resolved configuration.
fn resolve<I, T>(args: I) -> Result<(String, RunConfig), clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = Cli::command();
    let matches = command.clone().try_get_matches_from(args)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut cfg = RunConfig::default();
    let usage = |msg: String| Cli::command().error(clap::error::ErrorKind::ValueValidation, msg);
    if let Some(path) = sub.get_one::<PathBuf>("config") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config `{}`: {e}", path.display())))?;
        cfg.apply_text(&text, path).map_err(usage)?;
    }
    let spec = command.find_subcommand(name).expect("known subcommand");
    for arg in spec.get_arguments() {
        let id = arg.get_id().as_str();
        if id == "config" || sub.value_source(id) != Some(ValueSource::CommandLine) {
            continue;
        }
        let raw = sub
            .get_raw(id)
            .and_then(|mut v| v.next())
            .map(|v| v.to_string_lossy().into_owned())
            .unwrap_or_else(|| "true".into());
        cfg.set(id, &raw).map_err(usage)?;
    }
    cfg.validate().map_err(usage)?;
    Ok((name.to_string(), cfg))
}

/// Runs one command and returns its stdout report.
pub fn execute<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (name, cfg) = resolve(args).map_err(|e| CliError::Usage(e.to_string()))?;
    match name.as_str() {
        "synth" => commands::synth(&cfg),
        "embed" => commands::embed(&cfg),
        "tsne" => commands::tsne(&cfg),
        "eval" => commands::eval(&cfg),
        "compare" => commands::compare(&cfg),
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

/// Entry point for the binary: prints reports and errors, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<T> = args.into_iter().collect();
    if let Err(e) = Cli::command().try_get_matches_from(args.clone()) {
        use clap::error::ErrorKind;
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
            _ => EXIT_USAGE,
        };
        let _ = e.print();
        return code;
    }
    match execute(args) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Sizes the global worker pool from `KTSNE_THREADS` when it is set.
pub fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("KTSNE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("KTSNE_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}
