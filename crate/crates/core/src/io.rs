//! CSV and JSON files: feature matrices, layouts, density profiles, dense
//! affinities and metric curves. Every write goes to a temporary file in the
//! destination directory and is renamed into place.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use thiserror::Error;

use crate::density::DensityProfile;
use crate::embed::{EmbeddingMethod, FeatureMatrix};
use crate::eval::Curve;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: file is empty", path.display())]
    Empty { path: PathBuf },
    #[error("{}: bad header: {message}", path.display())]
    Header { path: PathBuf, message: String },
    #[error("{}, line {line}: expected {expected} fields, found {found}", path.display())]
    Ragged {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{}, line {line}, column {column}: `{value}` is not a finite number", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        value: String,
    },
    #[error("{}, line {line}: {message}", path.display())]
    Csv { path: PathBuf, line: u64, message: String },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Writes through `fill` into a temporary sibling of `path`, then renames it
/// over `path`. Nothing is left behind if `fill` fails.
pub fn atomic_write<F>(path: &Path, fill: F) -> Result<(), IoError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| IoError::io(path, e))?;
        w.flush().map_err(|e| IoError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    atomic_write(path, |w| w.write_all(text.as_bytes()))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_text(path, &text)
}

/// Rows of `id,label,<columns...>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub columns: Vec<String>,
    pub values: Array2<f64>,
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_table(path: &Path, table: &LabeledTable) -> Result<(), IoError> {
    atomic_write(path, |w| {
        let mut out = csv_writer(w);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend(table.columns.iter().cloned());
        out.write_record(&header).map_err(csv_err)?;
        let mut record = Vec::with_capacity(header.len());
        for (i, row) in table.values.rows().into_iter().enumerate() {
            record.clear();
            record.push(table.ids[i].clone());
            record.push(table.labels[i].clone());
            record.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&record).map_err(csv_err)?;
        }
        out.flush()
    })
}

pub fn read_table(path: &Path) -> Result<LabeledTable, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(IoError::Empty { path: path.to_path_buf() }),
        Some(r) => r.map_err(|e| csv_failure(path, e))?,
    };
    if header.len() < 3 || &header[0] != "id" || &header[1] != "label" {
        return Err(IoError::Header {
            path: path.to_path_buf(),
            message: "expected `id,label,` followed by at least one value column".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let width = header.len();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut flat = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_failure(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(IoError::Ragged {
                path: path.to_path_buf(),
                line,
                expected: width,
                found: rec.len(),
            });
        }
        ids.push(rec[0].to_string());
        labels.push(rec[1].to_string());
        for (c, field) in rec.iter().enumerate().skip(2) {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => flat.push(v),
                _ => {
                    return Err(IoError::Parse {
                        path: path.to_path_buf(),
                        line,
                        column: c + 1,
                        value: field.to_string(),
                    })
                }
            }
        }
    }
    if ids.is_empty() {
        return Err(IoError::Empty { path: path.to_path_buf() });
    }
    let values = Array2::from_shape_vec((ids.len(), columns.len()), flat).expect("rows have equal width");
    Ok(LabeledTable {
        ids,
        labels,
        columns,
        values,
    })
}

fn csv_failure(path: &Path, e: csv::Error) -> IoError {
    if let csv::ErrorKind::Io(_) = e.kind() {
        let csv::ErrorKind::Io(inner) = e.into_kind() else { unreachable!() };
        return IoError::io(path, inner);
    }
    IoError::Csv {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// `id,label,f0,f1,...`
pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<(), IoError> {
    write_table(
        path,
        &LabeledTable {
            ids: features.point_ids.clone(),
            labels: features.labels.clone(),
            columns: (0..features.dim()).map(|j| format!("f{j}")).collect(),
            values: features.values.clone(),
        },
    )
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix, IoError> {
    let t = read_table(path)?;
    Ok(FeatureMatrix {
        values: t.values,
        point_ids: t.ids,
        labels: t.labels,
        method: EmbeddingMethod::External,
    })
}

/// `id,label,y0,y1,...`
pub fn write_layout(path: &Path, ids: &[String], labels: &[String], y: &Array2<f64>) -> Result<(), IoError> {
    write_table(
        path,
        &LabeledTable {
            ids: ids.to_vec(),
            labels: labels.to_vec(),
            columns: (0..y.ncols()).map(|j| format!("y{j}")).collect(),
            values: y.clone(),
        },
    )
}

/// `id,role,weight,p`
pub fn write_density(path: &Path, ids: &[String], profile: &DensityProfile) -> Result<(), IoError> {
    atomic_write(path, |w| {
        let mut out = csv_writer(w);
        out.write_record(["id", "role", "weight", "p"]).map_err(csv_err)?;
        for (i, id) in ids.iter().enumerate() {
            out.write_record([
                id.clone(),
                profile.roles[i].to_string(),
                profile.weights[i].to_string(),
                profile.p[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()
    })
}

/// Dense matrix with an `id` header row and an id in front of every row.
pub fn write_matrix(path: &Path, ids: &[String], m: &Array2<f64>) -> Result<(), IoError> {
    atomic_write(path, |w| {
        let mut out = csv_writer(w);
        let mut header = vec!["id".to_string()];
        header.extend(ids.iter().cloned());
        out.write_record(&header).map_err(csv_err)?;
        for (i, row) in m.rows().into_iter().enumerate() {
            let mut rec = vec![ids[i].clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()
    })
}

/// `k,value`
pub fn write_curve(path: &Path, curve: &Curve) -> Result<(), IoError> {
    atomic_write(path, |w| {
        let mut out = csv_writer(w);
        out.write_record(["k", "value"]).map_err(csv_err)?;
        for p in &curve.0 {
            out.write_record([p.k.to_string(), p.value.to_string()]).map_err(csv_err)?;
        }
        out.flush()
    })
}
