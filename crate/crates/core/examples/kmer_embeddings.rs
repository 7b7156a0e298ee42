// The three sequence embeddings on one small corpus.

use std::error::Error;

use ktsne::embed::{embed_corpus, EmbedParams, EmbeddingMethod};
use ktsne::seqio::{synth_corpus, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let corpus = synth_corpus(&SynthSpec::new(2, 3, 30, 0.05, 1))?;
    for method in [EmbeddingMethod::Spike2vec, EmbeddingMethod::Spaced, EmbeddingMethod::Pwm2vec] {
        let params = EmbedParams::for_method(method);
        let fm = embed_corpus(&corpus, &params)?;
        let row = fm.values.row(0);
        let nonzero = row.iter().filter(|v| **v != 0.0).count();
        println!(
            "{method:<10} k={} -> {} x {} (row 0: {nonzero} nonzero, sum {:.3})",
            params.k,
            fm.n_points(),
            fm.dim(),
            row.sum()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
