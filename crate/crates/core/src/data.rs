//! Datasets, CSV input/output and seeded sample splitting.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// `n` observations of a `d`-dimensional covariate and a scalar response.
///
/// Covariates are stored row-major. Row order is the source order; nothing
/// here sorts or deduplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    x: Vec<f64>,
    y: Vec<f64>,
    d: usize,
}

impl DataSet {
    /// Builds a dataset from row-major covariates `x` (length `n * d`) and responses `y`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::NoCovariates);
        }
        if y.is_empty() {
            return Err(Error::EmptyFile("dataset has no rows".into()));
        }
        if x.len() != y.len() * d {
            return Err(Error::LengthMismatch {
                what: "covariates",
                expected: y.len() * d,
                found: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput("covariates"));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput("response"));
        }
        Ok(Self { x, y, d })
    }

    pub fn univariate(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::new(x, y, 1)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Row-major covariate matrix.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().skip(j).step_by(self.d).copied()
    }

    /// The dataset restricted to `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(indices.len() * self.d);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n() {
                return Err(Error::InvalidModel(format!(
                    "row index {i} out of range for n = {}",
                    self.n()
                )));
            }
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Self::new(x, y, self.d)
    }
}

/// A parsed numeric CSV: header plus rows of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Splits off `response` as y; all other columns become covariates in file order.
    pub fn into_dataset(self, response: &str) -> Result<(DataSet, Vec<String>)> {
        let r = self.column_index(response)?;
        let d = self.headers.len() - 1;
        if d == 0 {
            return Err(Error::NoCovariates);
        }
        let mut x = Vec::with_capacity(self.rows.len() * d);
        let mut y = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j == r {
                    y.push(*v);
                } else {
                    x.push(*v);
                }
            }
        }
        let names = self
            .headers
            .into_iter()
            .enumerate()
            .filter(|&(j, _)| j != r)
            .map(|(_, h)| h)
            .collect();
        Ok((DataSet::new(x, y, d)?, names))
    }

    /// Extracts the named columns, in the given order, as a row-major matrix.
    pub fn select(&self, names: &[String]) -> Result<Vec<f64>> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .rows
            .iter()
            .flat_map(|row| idx.iter().map(move |&j| row[j]))
            .collect())
    }
}

/// Parses comma-separated text with a header row; every cell must be a finite number.
pub fn read_numeric_csv<R: Read>(reader: R) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyFile("missing header row".into()));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .zip(&headers)
            .map(|(cell, name)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumericCell {
                    row: i + 1,
                    column: name.clone(),
                    value: cell.to_string(),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile("no data rows".into()));
    }
    Ok(NumericTable { headers, rows })
}

/// Reads a dataset from CSV text, selecting the response column by name.
pub fn read_csv<R: Read>(reader: R, response_column: &str) -> Result<(DataSet, Vec<String>)> {
    read_numeric_csv(reader)?.into_dataset(response_column)
}

/// Loads a dataset from a CSV file; covariates are every column except `response_column`.
pub fn load_csv(path: impl AsRef<Path>, response_column: &str) -> Result<DataSet> {
    Ok(read_csv(File::open(path)?, response_column)?.0)
}

/// Formats a value with 17 significant digits, enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes covariates as `x1..xd` and the response as `y`.
pub fn write_csv<W: Write>(data: &DataSet, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.d()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    wtr.write_record(&header)?;
    for (row, y) in data.rows().zip(data.y()) {
        let rec: Vec<String> = row.iter().chain(std::iter::once(y)).map(|&v| format_f64(v)).collect();
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(data: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    write_csv(data, File::create(path)?)
}

/// A seeded partition of `0..n` into a training set and a validation set.
///
/// Both index lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub n: usize,
    pub seed: u64,
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

/// round(√n), clamped so both sides of the split are non-empty.
pub fn default_validate_size(n: usize) -> usize {
    let s = (n as f64).sqrt().round() as usize;
    s.clamp(1, n.saturating_sub(1).max(1))
}

/// Draws `validate_size` indices uniformly without replacement as the validation set.
///
/// The draw is a partial Fisher–Yates shuffle driven by ChaCha8 seeded with `seed`.
pub fn split(n: usize, validate_size: usize, seed: u64) -> Result<SplitIndices> {
    if n < 2 || validate_size == 0 || validate_size >= n {
        return Err(Error::InvalidSplitSize {
            n,
            validate_size,
            max: n.saturating_sub(1),
        });
    }
    let mut rng = rng::seeded(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..validate_size {
        let j = rand::Rng::random_range(&mut rng, i..n);
        perm.swap(i, j);
    }
    let mut validate = perm[..validate_size].to_vec();
    let mut train = perm[validate_size..].to_vec();
    validate.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices {
        n,
        seed,
        train,
        validate,
    })
}
