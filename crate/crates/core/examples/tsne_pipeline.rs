// Sequences to a 2-D layout: spike2vec features, then t-SNE with the
// Gaussian and the density-weighted isolation kernel.

use std::error::Error;

use ktsne::embed::spike2vec;
use ktsne::kernel::KernelKind;
use ktsne::seqio::{synth_corpus, SynthSpec};
use ktsne::tsne::{run_pipeline, OptimizerConfig, PipelineConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = synth_corpus(&SynthSpec::new(3, 30, 60, 0.05, 7))?;
    let features = spike2vec(&corpus, 3)?;

    for kernel in [KernelKind::Gaussian, KernelKind::Mik] {
        let cfg = PipelineConfig {
            kernel,
            perplexity: 15.0,
            optimizer: OptimizerConfig {
                iterations: 400,
                ..OptimizerConfig::default()
            },
            seed: 7,
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&features, &cfg)?;
        let y = out.embedding();
        println!(
            "{kernel:<8} KL {:.4} -> {:.4}, y[0] = ({:.3}, {:.3})",
            out.trace.initial_loss(),
            out.trace.final_loss,
            y[[0, 0]],
            y[[0, 1]]
        );
        assert!(out.trace.final_loss < out.trace.initial_loss());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
