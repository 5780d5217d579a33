//! CSV matrices and dataset loading.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use wpl::dataset::DataSet;
use wpl::kernel_weights::CovariateMatrix;

use crate::error::{CliError, Result};

/// Reads a headerless numeric CSV. Errors name the 1-based line.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let parse_err = |line: u64, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("column {}: {cell:?} is not a finite number", c + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    line,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "file contains no rows".into()));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Shortest decimal form that parses back to the same `f64`; `NA` for NaN.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:?}")
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_rows(path, m.nrows(), |i| m.row(i).iter().map(|v| format_value(*v)).collect())
}

pub fn write_adjacency(path: &Path, m: &DMatrix<u8>) -> Result<()> {
    write_rows(path, m.nrows(), |i| m.row(i).iter().map(u8::to_string).collect())
}

/// Reads a 0/1 matrix written by [`write_adjacency`].
pub fn read_adjacency(path: &Path) -> Result<DMatrix<u8>> {
    let m = read_matrix(path)?;
    if let Some(bad) = m.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("adjacency entries must be 0 or 1, found {bad}"),
        });
    }
    Ok(m.map(|v| v as u8))
}

fn write_rows(path: &Path, rows: usize, row: impl Fn(usize) -> Vec<String>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    for i in 0..rows {
        w.write_record(row(i)).map_err(|e| CliError::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Loads observations and optional covariates.
pub fn load_dataset(data: &Path, covariates: Option<&Path>) -> Result<DataSet> {
    let x = read_matrix(data)?;
    let z = match covariates {
        Some(path) => {
            let z = read_matrix(path)?;
            if z.nrows() != x.nrows() {
                return Err(CliError::RowMismatch {
                    data: x.nrows(),
                    covariates: z.nrows(),
                    path: path.to_path_buf(),
                });
            }
            Some(CovariateMatrix::new(z)?)
        }
        None => None,
    };
    Ok(DataSet::new(x, z)?)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Parses a JSON or TOML file, chosen by extension (`.toml` is TOML,
/// anything else JSON).
pub fn read_structured<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let parsed = if is_toml {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| CliError::Config(format!("{}: {message}", path.display())))
}

/// `dir/name`, as an owned path.
pub fn join(dir: &Path, name: impl AsRef<Path>) -> PathBuf {
    dir.join(name)
}
