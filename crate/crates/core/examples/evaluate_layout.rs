// Quality metrics for a layout: neighborhood agreement, trustworthiness,
// k-means cluster scores and k-NN accuracy.

use std::error::Error;

use ktsne::embed::spike2vec;
use ktsne::eval::{evaluate, EvalConfig};
use ktsne::seqio::{synth_corpus, SynthSpec};
use ktsne::tsne::{run_pipeline, OptimizerConfig, PipelineConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = synth_corpus(&SynthSpec::new(3, 30, 60, 0.05, 2))?;
    let features = spike2vec(&corpus, 3)?;
    let cfg = PipelineConfig {
        perplexity: 15.0,
        optimizer: OptimizerConfig {
            iterations: 400,
            ..OptimizerConfig::default()
        },
        seed: 2,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&features, &cfg)?;

    let eval_cfg = EvalConfig {
        max_k: 40,
        seed: 2,
        ..EvalConfig::default()
    };
    let report = evaluate(features.values.view(), out.embedding().view(), &features.labels, &eval_cfg)?;
    println!("na ratio        {:.4}", report.na_ratio);
    for k in [5, 20, 40] {
        println!(
            "k={k:<3} na_knn {:.3}  trustworthiness {:.3}",
            report.na_knn.value_at(k).unwrap_or(f64::NAN),
            report.trustworthiness.value_at(k).unwrap_or(f64::NAN)
        );
    }
    println!(
        "k-means({}) silhouette {:.3}  CH {:.1}  DB {:.3}",
        report.n_clusters, report.silhouette, report.calinski, report.davies
    );
    println!("{}-NN accuracy   {:.3}", report.knn_k, report.knn_accuracy);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
