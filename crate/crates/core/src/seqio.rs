//! Labeled sequence corpora: FASTA ingestion and seeded synthetic generation.
//!
//! Headers follow `>id|label`; a header without `|` gets the label
//! `unlabeled`. Residues are upper-cased on read and validated against the
//! corpus [`Alphabet`], which always carries one ambiguity symbol (`X` for
//! amino acids, `N` for nucleotides).

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label given to records whose header carries no `|label` part.
pub const UNLABELED: &str = "unlabeled";

const AMINO_ACIDS: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";
const NUCLEOTIDES: &[u8] = b"ACGT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphabetKind {
    Amino,
    Nucleotide,
}

impl fmt::Display for AlphabetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphabetKind::Amino => f.write_str("amino"),
            AlphabetKind::Nucleotide => f.write_str("nucleotide"),
        }
    }
}

impl std::str::FromStr for AlphabetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "amino" | "protein" | "aa" => Ok(AlphabetKind::Amino),
            "nucleotide" | "dna" | "nt" => Ok(AlphabetKind::Nucleotide),
            other => Err(format!("unknown alphabet `{other}`")),
        }
    }
}

/// Symbol set of a corpus.
///
/// Symbol order is fixed: the core symbols, then the ambiguity symbol, then
/// the gap symbol `-` when enabled. k-mer indices are base-|Σ| numbers over
/// this order with the first residue most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    kind: AlphabetKind,
    allow_gap: bool,
    symbols: Vec<u8>,
    index: [u8; 256],
}

const NOT_IN_ALPHABET: u8 = u8::MAX;

impl Alphabet {
    pub fn new(kind: AlphabetKind) -> Self {
        Self::build(kind, false)
    }

    /// Alphabet extended with the alignment gap symbol `-`.
    pub fn with_gap(kind: AlphabetKind) -> Self {
        Self::build(kind, true)
    }

    fn build(kind: AlphabetKind, allow_gap: bool) -> Self {
        let (core, ambiguity) = match kind {
            AlphabetKind::Amino => (AMINO_ACIDS, b'X'),
            AlphabetKind::Nucleotide => (NUCLEOTIDES, b'N'),
        };
        let mut symbols = core.to_vec();
        symbols.push(ambiguity);
        if allow_gap {
            symbols.push(b'-');
        }
        let mut index = [NOT_IN_ALPHABET; 256];
        for (i, &s) in symbols.iter().enumerate() {
            index[s as usize] = i as u8;
        }
        Self {
            kind,
            allow_gap,
            symbols,
            index,
        }
    }

    pub fn kind(&self) -> AlphabetKind {
        self.kind
    }

    pub fn allows_gap(&self) -> bool {
        self.allow_gap
    }

    /// |Σ|, including the ambiguity slot (and gap, if enabled).
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    /// The unambiguous residues, used for synthetic sequence generation.
    pub fn core_symbols(&self) -> &[u8] {
        match self.kind {
            AlphabetKind::Amino => AMINO_ACIDS,
            AlphabetKind::Nucleotide => NUCLEOTIDES,
        }
    }

    pub fn ambiguity_symbol(&self) -> u8 {
        match self.kind {
            AlphabetKind::Amino => b'X',
            AlphabetKind::Nucleotide => b'N',
        }
    }

    /// Slot of an (upper-case) symbol, if it belongs to the alphabet.
    #[inline]
    pub fn index_of(&self, symbol: u8) -> Option<usize> {
        match self.index[symbol as usize] {
            NOT_IN_ALPHABET => None,
            i => Some(i as usize),
        }
    }

    pub fn contains(&self, symbol: u8) -> bool {
        self.index_of(symbol).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    pub label: String,
    pub residues: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<SequenceRecord>,
    pub alphabet: Alphabet,
}

impl Corpus {
    /// Builds a corpus after checking every corpus invariant.
    pub fn new(records: Vec<SequenceRecord>, alphabet: Alphabet) -> Result<Self, SeqError> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if record.residues.is_empty() {
                return Err(SeqError::EmptySequence {
                    id: record.id.clone(),
                    line: None,
                });
            }
            if let Some((pos, c)) = first_invalid(&record.residues, &alphabet) {
                return Err(SeqError::InvalidResidue {
                    id: record.id.clone(),
                    line: None,
                    column: pos + 1,
                    symbol: c,
                });
            }
            if !seen.insert(record.id.as_str()) {
                return Err(SeqError::DuplicateId {
                    id: record.id.clone(),
                    line: None,
                });
            }
        }
        Ok(Self { records, alphabet })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.records.iter().map(|r| r.label.clone()).collect()
    }

    pub fn min_length(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.residues.len())
            .min()
            .unwrap_or(0)
    }
}

fn first_invalid(residues: &str, alphabet: &Alphabet) -> Option<(usize, char)> {
    residues
        .char_indices()
        .find(|&(_, c)| !c.is_ascii() || !alphabet.contains(c as u8))
}

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty FASTA input")]
    EmptyInput,
    #[error("line {line}: expected a `>` header, found `{found}`")]
    MalformedHeader { line: usize, found: String },
    #[error("line {line}: header has an empty id")]
    EmptyId { line: usize },
    #[error("{}record `{id}`: character `{symbol}` at column {column} is not in the alphabet", line_prefix(*line))]
    InvalidResidue {
        id: String,
        line: Option<usize>,
        column: usize,
        symbol: char,
    },
    #[error("{}record `{id}` has no residues", line_prefix(*line))]
    EmptySequence { id: String, line: Option<usize> },
    #[error("{}duplicate record id `{id}`", line_prefix(*line))]
    DuplicateId { id: String, line: Option<usize> },
    #[error("invalid synthetic corpus parameters: {0}")]
    InvalidSynthParams(String),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

/// Reads a FASTA file. See [`parse_fasta`].
pub fn read_fasta(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<Corpus, SeqError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| SeqError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_fasta(BufReader::new(file), alphabet).map_err(|e| match e {
        SeqError::Io { source, .. } => SeqError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Parses FASTA text with `>id|label` headers. Sequence lines are joined and
/// upper-cased; blank lines are skipped; CRLF line endings are accepted.
pub fn parse_fasta(reader: impl BufRead, alphabet: &Alphabet) -> Result<Corpus, SeqError> {
    struct Pending {
        record: SequenceRecord,
        header_line: usize,
    }

    let mut records: Vec<SequenceRecord> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut current: Option<Pending> = None;

    let finish = |pending: Pending,
                  records: &mut Vec<SequenceRecord>,
                  seen: &mut HashSet<String>|
     -> Result<(), SeqError> {
        if pending.record.residues.is_empty() {
            return Err(SeqError::EmptySequence {
                id: pending.record.id,
                line: Some(pending.header_line),
            });
        }
        if !seen.insert(pending.record.id.clone()) {
            return Err(SeqError::DuplicateId {
                id: pending.record.id,
                line: Some(pending.header_line),
            });
        }
        records.push(pending.record);
        Ok(())
    };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| SeqError::Io {
            path: String::new(),
            source,
        })?;
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            if let Some(done) = current.take() {
                finish(done, &mut records, &mut seen)?;
            }
            let (id, label) = match header.split_once('|') {
                Some((id, label)) => (id.trim(), label.trim()),
                None => (header.trim(), UNLABELED),
            };
            if id.is_empty() {
                return Err(SeqError::EmptyId { line: line_no });
            }
            let label = if label.is_empty() { UNLABELED } else { label };
            current = Some(Pending {
                record: SequenceRecord {
                    id: id.to_string(),
                    label: label.to_string(),
                    residues: String::new(),
                },
                header_line: line_no,
            });
        } else {
            let Some(pending) = current.as_mut() else {
                return Err(SeqError::MalformedHeader {
                    line: line_no,
                    found: line.chars().take(40).collect(),
                });
            };
            let upper = line.to_ascii_uppercase();
            if let Some((pos, c)) = first_invalid(&upper, alphabet) {
                return Err(SeqError::InvalidResidue {
                    id: pending.record.id.clone(),
                    line: Some(line_no),
                    column: pos + 1,
                    symbol: c,
                });
            }
            pending.record.residues.push_str(&upper);
        }
    }
    if let Some(done) = current.take() {
        finish(done, &mut records, &mut seen)?;
    }
    if records.is_empty() {
        return Err(SeqError::EmptyInput);
    }
    Ok(Corpus {
        records,
        alphabet: alphabet.clone(),
    })
}

/// Writes one header line and one sequence line per record.
pub fn write_fasta(corpus: &Corpus, mut out: impl Write) -> std::io::Result<()> {
    for r in &corpus.records {
        if r.label == UNLABELED {
            writeln!(out, ">{}", r.id)?;
        } else {
            writeln!(out, ">{}|{}", r.id, r.label)?;
        }
        writeln!(out, "{}", r.residues)?;
    }
    Ok(())
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub per_class: usize,
    pub length: usize,
    pub mutation_rate: f64,
    pub seed: u64,
    pub alphabet: AlphabetKind,
}

impl SynthSpec {
    pub fn new(n_classes: usize, per_class: usize, length: usize, mutation_rate: f64, seed: u64) -> Self {
        Self {
            n_classes,
            per_class,
            length,
            mutation_rate,
            seed,
            alphabet: AlphabetKind::Amino,
        }
    }

    pub fn with_alphabet(mut self, alphabet: AlphabetKind) -> Self {
        self.alphabet = alphabet;
        self
    }
}

/// Draws one uniform ancestor per class over the core residues, then copies
/// it `per_class` times with independent point mutations. A mutated site
/// always changes to a different residue, so the Hamming distance to the
/// ancestor is Binomial(length, mutation_rate).
pub fn synth_corpus(spec: &SynthSpec) -> Result<Corpus, SeqError> {
    if !(0.0..=1.0).contains(&spec.mutation_rate) || spec.mutation_rate.is_nan() {
        return Err(SeqError::InvalidSynthParams(format!(
            "mutation rate {} outside [0, 1]",
            spec.mutation_rate
        )));
    }
    if spec.n_classes == 0 || spec.per_class == 0 || spec.length == 0 {
        return Err(SeqError::InvalidSynthParams(
            "class count, records per class and length must all be at least 1".into(),
        ));
    }
    let alphabet = Alphabet::new(spec.alphabet);
    let core = alphabet.core_symbols();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let ancestors: Vec<Vec<u8>> = (0..spec.n_classes)
        .map(|_| {
            (0..spec.length)
                .map(|_| core[rng.random_range(0..core.len())])
                .collect()
        })
        .collect();

    let mut records = Vec::with_capacity(spec.n_classes * spec.per_class);
    for (class, ancestor) in ancestors.iter().enumerate() {
        for member in 0..spec.per_class {
            let residues: Vec<u8> = ancestor
                .iter()
                .map(|&a| {
                    if rng.random::<f64>() < spec.mutation_rate {
                        // uniform over the other core.len() - 1 residues
                        let mut s = core[rng.random_range(0..core.len() - 1)];
                        if s == a {
                            s = core[core.len() - 1];
                        }
                        s
                    } else {
                        a
                    }
                })
                .collect();
            records.push(SequenceRecord {
                id: format!("class{class}_{member}"),
                label: format!("class{class}"),
                residues: String::from_utf8(residues).expect("alphabet symbols are ASCII"),
            });
        }
    }
    Ok(Corpus { records, alphabet })
}
