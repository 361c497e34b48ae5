//! Tabular data: a feature matrix, a response vector and column names.
//!
//! On disk a dataset is a comma-separated file with a header row. The
//! response is the last column unless a response column name is given.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, XnnError};

pub const DEFAULT_RESPONSE_NAME: &str = "y";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub response: Array1<f64>,
    pub feature_names: Vec<String>,
    /// Where the data came from, e.g. `legendre` or a file path.
    pub generator_tag: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        response: Array1<f64>,
        feature_names: Vec<String>,
        generator_tag: impl Into<String>,
    ) -> Result<Self> {
        let data = Self {
            features,
            response,
            feature_names,
            generator_tag: generator_tag.into(),
        };
        data.validate()?;
        Ok(data)
    }

    /// Builds a dataset with names `x1..xp`.
    pub fn from_arrays(features: Array2<f64>, response: Array1<f64>, tag: &str) -> Result<Self> {
        let names = default_feature_names(features.ncols());
        Self::new(features, response, names, tag)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.response.len() != self.features.nrows() {
            return Err(XnnError::dimension(
                "response length",
                self.features.nrows(),
                self.response.len(),
            ));
        }
        if self.feature_names.len() != self.features.ncols() {
            return Err(XnnError::dimension(
                "feature names",
                self.features.ncols(),
                self.feature_names.len(),
            ));
        }
        for ((i, j), v) in self.features.indexed_iter() {
            if !v.is_finite() {
                return Err(XnnError::NonFinite {
                    path: format!("features[{i}][{}]", self.feature_names[j]),
                });
            }
        }
        if let Some(i) = self.response.iter().position(|v| !v.is_finite()) {
            return Err(XnnError::NonFinite {
                path: format!("response[{i}]"),
            });
        }
        Ok(())
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let p = self.n_features();
        let features = Array2::from_shape_fn((rows.len(), p), |(i, j)| self.features[[rows[i], j]]);
        let response = rows.iter().map(|&r| self.response[r]).collect();
        Dataset {
            features,
            response,
            feature_names: self.feature_names.clone(),
            generator_tag: self.generator_tag.clone(),
        }
    }

    /// Writes the CSV form with the response as the last column named `y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_with_response(out, DEFAULT_RESPONSE_NAME)
    }

    pub fn write_csv_with_response<W: Write>(&self, out: W, response_name: &str) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(response_name);
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (row, y) in self.features.rows().into_iter().zip(self.response.iter()) {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(y.to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Reads a CSV dataset. With `response` set, that column is the response;
    /// otherwise the last column is.
    pub fn read_csv<R: Read>(input: R, response: Option<&str>, tag: &str) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        if header.len() < 2 {
            return Err(XnnError::parse(
                "header",
                "need at least one feature column and a response column",
            ));
        }
        let response_col = match response {
            Some(name) => header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| XnnError::MissingColumn(name.to_owned()))?,
            None => header.len() - 1,
        };
        let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != response_col).collect();
        let mut values = Vec::new();
        let mut ys = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            for &c in &feature_cols {
                values.push(parse_cell(&record, r, c, &header[c])?);
            }
            ys.push(parse_cell(&record, r, response_col, &header[response_col])?);
        }
        let features = Array2::from_shape_vec((ys.len(), feature_cols.len()), values)
            .map_err(|e| XnnError::parse("features", e.to_string()))?;
        let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
        Dataset::new(features, Array1::from(ys), names, tag)
    }

    pub fn load_csv(path: impl AsRef<Path>, response: Option<&str>) -> Result<Dataset> {
        let path = path.as_ref();
        Self::read_csv(File::open(path)?, response, &path.display().to_string())
    }
}

/// Reads every column of a CSV file with a header row as numbers.
pub fn read_table_csv<R: Read>(input: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        for (c, name) in header.iter().enumerate() {
            values.push(parse_cell(&record, r, c, name)?);
        }
        rows += 1;
    }
    let table = Array2::from_shape_vec((rows, header.len()), values)
        .map_err(|e| XnnError::parse("table", e.to_string()))?;
    Ok((header, table))
}

fn parse_cell(record: &csv::StringRecord, row: usize, col: usize, name: &str) -> Result<f64> {
    let cell = record
        .get(col)
        .ok_or_else(|| XnnError::parse(name, format!("row {} is missing this column", row + 1)))?;
    cell.parse::<f64>()
        .map_err(|_| XnnError::parse(name, format!("row {}: `{cell}` is not a number", row + 1)))
}

pub fn default_feature_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Provenance written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub generator_tag: String,
    pub seed: u64,
    pub n: usize,
    pub feature_names: Vec<String>,
    pub response_name: String,
}

/// `data.csv` -> `data.csv.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_sidecar(path: &Path, meta: &DatasetMetadata) -> Result<()> {
    let mut out = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut out, meta)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
