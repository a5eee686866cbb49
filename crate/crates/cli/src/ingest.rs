//! CSV ingestion: header row of unique names, finite decimal cells.

use std::path::Path;

use causal_order::DataMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error("cell at row {row}, column '{column}' does not parse as a number: '{value}'")]
    Parse { row: usize, column: String, value: String },
    #[error("missing or non-finite value at row {row}, column '{column}'")]
    MissingValue { row: usize, column: String },
    #[error("duplicate header '{name}'")]
    DuplicateHeader { name: String },
    #[error("{0}")]
    Shape(String),
}

/// Read a CSV file into a data matrix. Columns keep file order; values are
/// not transformed (centering happens inside the regression cascade).
///
/// Row numbers in errors are 1-based over the whole file, so the first data
/// row is row 2.
pub fn ingest_csv(path: &Path) -> Result<DataMatrix, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| IngestError::Malformed(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 {
        return Err(IngestError::Shape(format!(
            "need at least 2 columns, found {}",
            headers.len()
        )));
    }
    for (i, name) in headers.iter().enumerate() {
        if headers[..i].contains(name) {
            return Err(IngestError::DuplicateHeader { name: name.clone() });
        }
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header
        let record = record.map_err(|e| IngestError::Malformed(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(IngestError::Malformed(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let column = headers[col].clone();
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                return Err(IngestError::MissingValue { row, column });
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| IngestError::Parse { row, column: column.clone(), value: cell.to_string() })?;
            if !value.is_finite() {
                return Err(IngestError::MissingValue { row, column });
            }
            columns[col].push(value);
        }
    }

    let n = columns[0].len();
    if n < 3 {
        return Err(IngestError::Shape(format!("need at least 3 data rows, found {n}")));
    }
    DataMatrix::new(headers.into_iter().zip(columns).collect())
        .map_err(|e| IngestError::Shape(e.to_string()))
}
