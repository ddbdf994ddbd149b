//! CSV ingestion and export. A header row is required; one named column holds
//! the labels and every other column must be numeric.

use std::collections::HashMap;
use std::path::Path;

use dcepcc_core::data::Dataset;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Hex SHA-256 of a byte buffer.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads `path`, mapping label values to `0, 1, …` in order of first
/// appearance. The class names keep the original label strings and the
/// provenance records the path and content digest.
pub fn load_csv(path: &Path, label_column: &str) -> CliResult<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = sha256_hex(&bytes);
    let ds = parse_csv(&bytes, label_column).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(ds.with_provenance(format!("csv:{} sha256:{digest}", path.display())))
}

/// [`load_csv`] on an in-memory buffer.
pub fn parse_csv(bytes: &[u8], label_column: &str) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|e| CliError::Data(format!("cannot read header: {e}")))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| CliError::Data(format!("label column `{label_column}` not found in header")))?;
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(CliError::Data("no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Data(format!("malformed row at line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (col, cell) in record.iter().enumerate() {
            if col == label_idx {
                let next = names.len();
                let label = *index.entry(cell.to_string()).or_insert_with(|| {
                    names.push(cell.to_string());
                    next
                });
                labels.push(label);
            } else {
                let value: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                    CliError::Data(format!("line {line}, column `{}`: `{cell}` is not a finite number", &headers[col]))
                })?;
                features.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    let classes = names.len();
    Ok(Dataset::new(features, dim, labels, classes)?.with_class_names(names)?)
}

/// Writes `x0 … x{d-1}` feature columns and a `label_column` holding the class
/// names, or the integer labels when the dataset has none. Floats use the
/// shortest representation that parses back to the same value.
pub fn save_csv(dataset: &Dataset, path: &Path, label_column: &str) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut header: Vec<String> = (0..dataset.dim()).map(|m| format!("x{m}")).collect();
    header.push(label_column.to_string());
    let fail = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    writer.write_record(&header).map_err(fail)?;
    for (x, y) in dataset.iter() {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(match dataset.class_names() {
            Some(names) => names[y].clone(),
            None => y.to_string(),
        });
        writer.write_record(&row).map_err(fail)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}
