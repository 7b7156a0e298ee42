// Generate a labeled synthetic protein corpus, write it as FASTA and read it back.

use std::error::Error;
use std::io::Cursor;

use ktsne::seqio::{parse_fasta, synth_corpus, write_fasta, Alphabet, AlphabetKind, SynthSpec};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let spec = SynthSpec::new(3, 4, 40, 0.1, 7);
    let corpus = synth_corpus(&spec)?;

    let mut buf = Vec::new();
    write_fasta(&corpus, &mut buf)?;
    let text = String::from_utf8(buf)?;
    print!("{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();

    let back = parse_fasta(Cursor::new(text.as_bytes()), &Alphabet::new(AlphabetKind::Amino))?;
    assert_eq!(back, corpus);
    println!("{} records, labels {:?}", back.len(), {
        let mut l = back.labels();
        l.dedup();
        l
    });
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
