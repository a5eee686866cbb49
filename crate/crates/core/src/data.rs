use crate::error::{Error, Result};

/// An n x p sample matrix with named columns: the observational dataset.
///
/// Invariants enforced at construction: every column has the same length
/// n >= 3, all values are finite, and column names are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl DataMatrix {
    pub fn new(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidInput("a data matrix needs at least one column".into()));
        }
        let n = columns[0].1.len();
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "a data matrix needs at least 3 rows, got {n}"
            )));
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut values = Vec::with_capacity(columns.len());
        for (idx, (name, col)) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::LengthMismatch { left: n, right: col.len() });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite value in column '{name}' (index {idx}) at row {row}"
                )));
            }
            if names.contains(&name) {
                return Err(Error::InvalidInput(format!("duplicate column name '{name}'")));
            }
            names.push(name);
            values.push(col);
        }
        Ok(Self { names, columns: values, n })
    }

    /// Sample count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Variable count.
    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}
