// Drive the command-line workflow from code: synthesize, embed, run t-SNE, evaluate
// and run a small kernel comparison in a scratch directory.

use std::error::Error;

use ktsne::cli::execute;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let out = |name: &str| dir.path().join(name).display().to_string();
    let fasta = dir.path().join("synth").join("synth.fasta").display().to_string();

    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--synth".into(), "3x20".into(), "--out".into(), out("synth")],
        vec!["embed".into(), "--input".into(), fasta.clone(), "--out".into(), out("embed")],
        vec![
            "tsne".into(), "--features".into(), out("embed/embedding.csv"), "--kernel".into(), "mik".into(),
            "--perplexity".into(), "10".into(), "--iterations".into(), "300".into(), "--out".into(), out("tsne"),
        ],
        vec![
            "eval".into(), "--x".into(), out("embed/embedding.csv"), "--y".into(), out("tsne/Y.csv"),
            "--max-k".into(), "20".into(), "--out".into(), out("eval"),
        ],
        vec![
            "compare".into(), "--input".into(), fasta, "--kernels".into(), "gaussian,mik".into(),
            "--perplexity".into(), "10".into(), "--iterations".into(), "300".into(), "--repeats".into(), "2".into(),
            "--max-k".into(), "20".into(), "--out".into(), out("compare"),
        ],
    ];
    for args in steps {
        let mut argv = vec!["ktsne".to_string()];
        argv.extend(args);
        let msg = execute(argv).map_err(|e| e.to_string())?;
        println!("{}", msg.trim_end());
    }
    print!("{}", std::fs::read_to_string(dir.path().join("compare/summary.csv"))?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
