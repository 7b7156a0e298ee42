use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::svg::scatter_svg;
use super::CliError;
use crate::density::{DbscanParams, Role};
use crate::embed::{embed_corpus, EmbeddingMethod, FeatureMatrix};
use crate::eval::{evaluate, MetricReport};
use crate::init::InitMethod;
use crate::io::{self, read_table, write_curve, write_density, write_features, write_json, write_layout, write_matrix};
use crate::kernel::KernelKind;
use crate::seqio::{read_fasta, synth_corpus, write_fasta, Alphabet, Corpus};
use crate::tsne::{run_pipeline, PipelineOutput};

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create `{}`: {e}", dir.display())))
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let alphabet = if cfg.allow_gap {
        Alphabet::with_gap(cfg.alphabet)
    } else {
        Alphabet::new(cfg.alphabet)
    };
    match (&cfg.input, cfg.synth_spec()) {
        (Some(_), Some(_)) => Err(CliError::Usage("pass either --input or --synth, not both".into())),
        (Some(path), None) => Ok(read_fasta(path, &alphabet)?),
        (None, Some(spec)) => Ok(synth_corpus(&spec)?),
        (None, None) => Err(CliError::Usage(
            "no sequences given: pass --input <fasta> or --synth <classes>x<per_class>".into(),
        )),
    }
}

/// The configuration as echoed to disk, with the command name and the
/// effective k-mer length filled in.
#[derive(Serialize)]
struct Echo<'a> {
    command: &'a str,
    #[serde(flatten)]
    config: RunConfig,
}

fn echo<'a>(command: &'a str, cfg: &RunConfig) -> Echo<'a> {
    let mut config = cfg.clone();
    if command != "compare" && command != "eval" {
        config.k = Some(cfg.embed_params(cfg.method).k);
    }
    Echo { command, config }
}

fn write_echo(command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    Ok(write_json(&cfg.out.join("config.resolved.json"), &echo(command, cfg))?)
}

pub fn synth(cfg: &RunConfig) -> Result<String, CliError> {
    if cfg.synth.is_none() {
        return Err(CliError::Usage("synth needs --synth <classes>x<per_class>".into()));
    }
    let corpus = load_corpus(cfg)?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("synth.fasta");
    io::atomic_write(&path, |w| write_fasta(&corpus, w))?;
    write_echo("synth", cfg)?;
    Ok(format!("{}: {} sequences\n", path.display(), corpus.len()))
}

pub fn embed(cfg: &RunConfig) -> Result<String, CliError> {
    let corpus = load_corpus(cfg)?;
    let features = embed_corpus(&corpus, &cfg.embed_params(cfg.method))?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("embedding.csv");
    write_features(&path, &features)?;
    write_echo("embed", cfg)?;
    Ok(format!(
        "{}: {} points x {} features ({})\n",
        path.display(),
        features.n_points(),
        features.dim(),
        features.method
    ))
}

fn features_for(cfg: &RunConfig) -> Result<FeatureMatrix, CliError> {
    match &cfg.features {
        Some(path) => {
            if cfg.input.is_some() || cfg.synth.is_some() {
                return Err(CliError::Usage("pass either --features or sequences, not both".into()));
            }
            let mut f = io::read_features(path)?;
            if cfg.standardize {
                f.standardize();
            }
            Ok(f)
        }
        None => Ok(embed_corpus(&load_corpus(cfg)?, &cfg.embed_params(cfg.method))?),
    }
}

fn check_perplexity(cfg: &RunConfig, n: usize, kernel: KernelKind) -> Result<(), CliError> {
    if kernel != KernelKind::Isolation && cfg.perplexity >= n as f64 {
        return Err(CliError::Usage(format!(
            "perplexity {} must be below the number of points ({n})",
            cfg.perplexity
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct RoleCounts {
    core: usize,
    border: usize,
    noise: usize,
}

#[derive(Serialize)]
struct BandwidthSummary {
    min_sigma: f64,
    max_sigma: f64,
    unconverged: Vec<usize>,
}

#[derive(Serialize)]
struct Timings {
    total_seconds: f64,
}

#[derive(Serialize)]
struct TraceFile<'a> {
    config: Echo<'a>,
    n_points: usize,
    iterations: usize,
    initial_loss: f64,
    final_loss: f64,
    losses: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidths: Option<BandwidthSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dbscan: Option<DbscanParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    roles: Option<RoleCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timings: Option<Timings>,
}

fn trace_file<'a>(cfg: &RunConfig, out: &'a PipelineOutput, started: Instant) -> TraceFile<'a> {
    let bandwidths = out.bandwidths.as_ref().map(|b| BandwidthSummary {
        min_sigma: b.sigma.iter().copied().fold(f64::INFINITY, f64::min),
        max_sigma: b.sigma.iter().copied().fold(0.0, f64::max),
        unconverged: b.unconverged(),
    });
    let roles = out.density.as_ref().map(|d| {
        let count = |r: Role| d.roles.iter().filter(|x| **x == r).count();
        RoleCounts {
            core: count(Role::Core),
            border: count(Role::Border),
            noise: count(Role::Noise),
        }
    });
    TraceFile {
        config: echo("tsne", cfg),
        n_points: out.p.len(),
        iterations: out.trace.iterations,
        initial_loss: out.trace.initial_loss(),
        final_loss: out.trace.final_loss,
        losses: &out.trace.losses,
        bandwidths,
        dbscan: out.dbscan,
        roles,
        timings: cfg.timings.then(|| Timings {
            total_seconds: started.elapsed().as_secs_f64(),
        }),
    }
}

pub fn tsne(cfg: &RunConfig) -> Result<String, CliError> {
    let started = Instant::now();
    let features = features_for(cfg)?;
    check_perplexity(cfg, features.n_points(), cfg.kernel)?;
    let out = run_pipeline(&features, &cfg.pipeline(cfg.kernel, cfg.init, cfg.seed))?;
    ensure_dir(&cfg.out)?;
    let y = out.embedding();
    write_layout(&cfg.out.join("Y.csv"), &features.point_ids, &features.labels, y)?;
    let title = format!("t-SNE, {} kernel, {} init", cfg.kernel, cfg.init);
    io::write_text(&cfg.out.join("scatter.svg"), &scatter_svg(y, &features.labels, &title))?;
    if let Some(density) = &out.density {
        write_density(&cfg.out.join("density.csv"), &features.point_ids, density)?;
    }
    if cfg.dump_affinity {
        write_matrix(&cfg.out.join("affinity.csv"), &features.point_ids, &out.affinity.values)?;
    }
    write_json(&cfg.out.join("trace.json"), &trace_file(cfg, &out, started))?;
    write_echo("tsne", cfg)?;
    Ok(format!(
        "{} points, {} iterations: KL {:.6} -> {:.6}\n",
        features.n_points(),
        out.trace.iterations,
        out.trace.initial_loss(),
        out.trace.final_loss
    ))
}

fn read_labels(path: &Path, ids: &[String]) -> Result<Vec<String>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if rec.len() < 2 {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(CliError::Data(format!("{}, line {line}: expected `id,label`", path.display())));
        }
        map.insert(rec[0].to_string(), rec[1].to_string());
    }
    ids.iter()
        .map(|id| {
            map.get(id)
                .cloned()
                .ok_or_else(|| CliError::Data(format!("{}: no label for id `{id}`", path.display())))
        })
        .collect()
}

fn first_id_mismatch(a: &[String], b: &[String]) -> Option<(usize, String, String)> {
    let n = a.len().max(b.len());
    (0..n).find_map(|i| {
        let x = a.get(i).cloned().unwrap_or_else(|| "<none>".into());
        let y = b.get(i).cloned().unwrap_or_else(|| "<none>".into());
        (x != y).then_some((i, x, y))
    })
}

pub fn eval(cfg: &RunConfig) -> Result<String, CliError> {
    let (Some(xp), Some(yp)) = (&cfg.x, &cfg.y) else {
        return Err(CliError::Usage("eval needs --x <features.csv> and --y <Y.csv>".into()));
    };
    let x = read_table(xp)?;
    let y = read_table(yp)?;
    if let Some((row, a, b)) = first_id_mismatch(&x.ids, &y.ids) {
        return Err(CliError::Data(format!(
            "ids of {} and {} differ at row {}: `{a}` vs `{b}`",
            xp.display(),
            yp.display(),
            row + 1
        )));
    }
    let labels = match &cfg.labels {
        Some(p) => read_labels(p, &x.ids)?,
        None => x.labels.clone(),
    };
    let report = evaluate(x.values.view(), y.values.view(), &labels, &cfg.eval_config(cfg.seed))?;
    ensure_dir(&cfg.out)?;
    write_json(&cfg.out.join("metrics.json"), &report)?;
    write_curve(&cfg.out.join("na_knn.csv"), &report.na_knn)?;
    write_curve(&cfg.out.join("trustworthiness.csv"), &report.trustworthiness)?;
    write_echo("eval", cfg)?;
    Ok(format!(
        "NA ratio {:.4}, silhouette {:.4}, kNN accuracy {:.4}\n",
        report.na_ratio, report.silhouette, report.knn_accuracy
    ))
}

struct CellResult {
    metrics: MetricReport,
    final_loss: f64,
    seconds: f64,
}

#[derive(Clone, Copy)]
struct Cell {
    method: EmbeddingMethod,
    kernel: KernelKind,
    init: InitMethod,
}

impl Cell {
    fn name(&self) -> String {
        format!("{}-{}-{}", self.method, self.kernel, self.init)
    }
}

fn run_cell(features: &FeatureMatrix, cfg: &RunConfig, cell: Cell, seed: u64, dir: &Path) -> Result<CellResult, String> {
    let started = Instant::now();
    let inner = || -> Result<CellResult, CliError> {
        check_perplexity(cfg, features.n_points(), cell.kernel)?;
        let out = run_pipeline(features, &cfg.pipeline(cell.kernel, cell.init, seed))?;
        let metrics = evaluate(
            features.values.view(),
            out.embedding().view(),
            &features.labels,
            &cfg.eval_config(seed),
        )?;
        ensure_dir(dir)?;
        write_layout(&dir.join("Y.csv"), &features.point_ids, &features.labels, out.embedding())?;
        write_json(&dir.join("metrics.json"), &metrics)?;
        Ok(CellResult {
            metrics,
            final_loss: out.trace.final_loss,
            seconds: 0.0,
        })
    };
    inner()
        .map(|mut r| {
            r.seconds = started.elapsed().as_secs_f64();
            r
        })
        .map_err(|e| e.to_string())
}

/// Mean and sample standard deviation (0 for a single value); None when empty.
fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

type Extract = fn(&CellResult) -> f64;

const SUMMARY_METRICS: [(&str, Extract); 8] = [
    ("na@10", |r| r.metrics.na_knn.value_at(10).unwrap_or(f64::NAN)),
    ("na@50", |r| r.metrics.na_knn.value_at(50).unwrap_or(f64::NAN)),
    ("na@100", |r| r.metrics.na_knn.value_at(100).unwrap_or(f64::NAN)),
    ("tw@100", |r| r.metrics.trustworthiness.value_at(100).unwrap_or(f64::NAN)),
    ("silhouette", |r| r.metrics.silhouette),
    ("knn_accuracy", |r| r.metrics.knn_accuracy),
    ("final_kl", |r| r.final_loss),
    ("runtime_seconds", |r| r.seconds),
];

/// k values of the MIK-versus-Gaussian neighborhood-agreement comparison.
pub const TREND_KS: std::ops::RangeInclusive<usize> = 10..=100;

fn mean_curve(runs: &[Result<CellResult, String>], k: usize) -> Option<f64> {
    let v: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter_map(|r| r.metrics.na_knn.value_at(k))
        .collect();
    mean_std(&v).map(|m| m.0)
}

fn fmt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn compare(cfg: &RunConfig) -> Result<String, CliError> {
    let started = Instant::now();
    let corpus = load_corpus(cfg)?;
    ensure_dir(&cfg.out)?;
    let cells_dir: PathBuf = cfg.out.join("cells");

    let mut rows: Vec<(Cell, Vec<Result<CellResult, String>>)> = Vec::new();
    for &method in &cfg.methods {
        let cells: Vec<Cell> = cfg
            .kernels
            .iter()
            .flat_map(|&kernel| cfg.inits.iter().map(move |&init| Cell { method, kernel, init }))
            .collect();
        match embed_corpus(&corpus, &cfg.embed_params(method)) {
            Err(e) => {
                for cell in cells {
                    rows.push((cell, vec![Err(format!("embedding failed: {e}"))]));
                }
            }
            Ok(features) => {
                let jobs: Vec<(usize, u64)> = (0..cells.len())
                    .flat_map(|c| (0..cfg.repeats as u64).map(move |r| (c, r)))
                    .collect();
                let mut results: Vec<Option<Result<CellResult, String>>> = jobs
                    .par_iter()
                    .map(|&(c, r)| {
                        let seed = cfg.seed + r;
                        let dir = cells_dir.join(cells[c].name()).join(format!("seed{seed}"));
                        Some(run_cell(&features, cfg, cells[c], seed, &dir))
                    })
                    .collect();
                for (c, cell) in cells.iter().enumerate() {
                    let runs = (0..cfg.repeats)
                        .map(|r| results[c * cfg.repeats + r].take().expect("each job once"))
                        .collect();
                    rows.push((*cell, runs));
                }
            }
        }
    }

    // share of trend k values at which MIK's mean na_knn is at least Gaussian's
    let trend_ks: Vec<usize> = TREND_KS.collect();
    let mut trend_rows: Vec<(Cell, usize, f64, f64)> = Vec::new();
    let mut dominance: HashMap<(EmbeddingMethod, InitMethod), (usize, usize)> = HashMap::new();
    for (cell, runs) in rows.iter().filter(|(c, _)| c.kernel == KernelKind::Mik) {
        let Some((_, base)) = rows
            .iter()
            .find(|(c, _)| c.kernel == KernelKind::Gaussian && c.method == cell.method && c.init == cell.init)
        else {
            continue;
        };
        let mut wins = 0;
        let mut total = 0;
        for &k in &trend_ks {
            if let (Some(g), Some(m)) = (mean_curve(base, k), mean_curve(runs, k)) {
                trend_rows.push((*cell, k, g, m));
                total += 1;
                if m >= g {
                    wins += 1;
                }
            }
        }
        dominance.insert((cell.method, cell.init), (wins, total));
    }

    let summary_path = cfg.out.join("summary.csv");
    io::atomic_write(&summary_path, |w| {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let mut header: Vec<String> = ["kernel", "init", "embedding", "status", "repeats"].map(String::from).to_vec();
        for (name, _) in SUMMARY_METRICS {
            header.push(name.to_string());
            header.push(format!("{name}_std"));
        }
        header.push("na_knn_ge_gaussian".into());
        out.write_record(&header).map_err(std::io::Error::other)?;
        for (cell, runs) in &rows {
            let ok: Vec<&CellResult> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
            let status = match runs.iter().find_map(|r| r.as_ref().err()) {
                None => "ok".to_string(),
                Some(e) => format!("error ({} of {} failed): {e}", runs.len() - ok.len(), runs.len()),
            };
            let mut rec = vec![
                cell.kernel.to_string(),
                cell.init.to_string(),
                cell.method.to_string(),
                status,
                ok.len().to_string(),
            ];
            for (_, get) in SUMMARY_METRICS {
                let vals: Vec<f64> = ok.iter().map(|r| get(r)).collect();
                let ms = mean_std(&vals);
                rec.push(fmt_num(ms.map(|m| m.0)));
                rec.push(fmt_num(ms.map(|m| m.1)));
            }
            let dom = dominance
                .get(&(cell.method, cell.init))
                .filter(|_| cell.kernel == KernelKind::Mik)
                .filter(|(_, t)| *t > 0)
                .map(|(w, t)| *w as f64 / *t as f64);
            rec.push(fmt_num(dom));
            out.write_record(&rec).map_err(std::io::Error::other)?;
        }
        out.flush()
    })?;

    if !trend_rows.is_empty() {
        io::atomic_write(&cfg.out.join("trend.csv"), |w| {
            let mut out = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(w);
            out.write_record(["embedding", "init", "k", "gaussian_na_knn", "mik_na_knn", "mik_ge_gaussian"])
                .map_err(std::io::Error::other)?;
            for (cell, k, g, m) in &trend_rows {
                out.write_record([
                    cell.method.to_string(),
                    cell.init.to_string(),
                    k.to_string(),
                    g.to_string(),
                    m.to_string(),
                    u8::from(m >= g).to_string(),
                ])
                .map_err(std::io::Error::other)?;
            }
            out.flush()
        })?;
    }
    write_echo("compare", cfg)?;

    let mut report = String::new();
    let failed = rows.iter().filter(|(_, r)| r.iter().any(|x| x.is_err())).count();
    let _ = writeln!(
        report,
        "{}: {} rows ({} with failures)",
        summary_path.display(),
        rows.len(),
        failed
    );
    let mut keys: Vec<_> = dominance.iter().collect();
    keys.sort_by_key(|((m, i), _)| (m.to_string(), i.to_string()));
    for ((method, init), (wins, total)) in keys {
        let verdict = if 2 * wins > *total { "majority" } else { "no majority" };
        let _ = writeln!(
            report,
            "trend {method}/{init}: MIK na_knn >= Gaussian at {wins} of {total} k values ({verdict})"
        );
    }
    let _ = writeln!(report, "total runtime: {:.2} s", started.elapsed().as_secs_f64());
    Ok(report)
}
