//! CSV ingestion.
//!
//! A data file has a header row. The `y` column is required and every value
//! must lie strictly inside (0, 1). An optional `date` column is carried
//! along as text. Every other column is a numeric covariate, in header
//! order.

use std::io::Read;
use std::path::Path;

use betarc::model::SeriesSample;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub y: Vec<f64>,
    pub dates: Option<Vec<String>>,
    pub covariate_names: Vec<String>,
    /// One row per observation; empty rows when there are no covariates.
    pub covariates: Vec<Vec<f64>>,
}

impl DataFile {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Rows `range` as a sample.
    pub fn sample(&self, range: std::ops::Range<usize>) -> CliResult<SeriesSample> {
        let y = self.y[range.clone()].to_vec();
        let x = if self.covariate_names.is_empty() {
            None
        } else {
            Some(self.covariates[range.clone()].to_vec())
        };
        let mut sample = SeriesSample::with_covariates(y, x)?;
        sample.timestamps = self.dates.as_ref().map(|d| d[range].to_vec());
        Ok(sample)
    }
}

fn parse_cell(raw: &str, column: &str, row: usize) -> CliResult<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(CliError::Data(format!("row {row}: missing value in column '{column}'")));
    }
    trimmed
        .parse::<f64>()
        .map_err(|_| CliError::Data(format!("row {row}: cannot parse '{trimmed}' in column '{column}'")))
}

/// Reads a data file. Row numbers in error messages count data rows from 1.
pub fn parse_data<R: Read>(reader: R) -> CliResult<DataFile> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read CSV header: {e}")))?
        .clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| CliError::Data("CSV header has no 'y' column".into()))?;
    let date_col = headers.iter().position(|h| h == "date");
    let cov_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != y_col && Some(i) != date_col).collect();
    let covariate_names: Vec<String> = cov_cols.iter().map(|&i| headers[i].to_string()).collect();

    let mut y = Vec::new();
    let mut dates = date_col.map(|_| Vec::new());
    let mut covariates = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        let value = parse_cell(record.get(y_col).unwrap_or(""), "y", row)?;
        if !(value > 0.0 && value < 1.0) {
            return Err(CliError::Data(format!("row {row}: y = {value} is outside (0, 1)")));
        }
        y.push(value);
        if let (Some(col), Some(d)) = (date_col, dates.as_mut()) {
            d.push(record.get(col).unwrap_or("").to_string());
        }
        let mut x = Vec::with_capacity(cov_cols.len());
        for (&col, name) in cov_cols.iter().zip(&covariate_names) {
            x.push(parse_cell(record.get(col).unwrap_or(""), name, row)?);
        }
        covariates.push(x);
    }
    if y.is_empty() {
        return Err(CliError::Data("CSV has no data rows".into()));
    }
    Ok(DataFile {
        y,
        dates,
        covariate_names,
        covariates,
    })
}

pub fn read_data(path: &Path) -> CliResult<DataFile> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_data(file)
}

/// Reads a covariate-only CSV: a header and numeric columns.
pub fn read_covariates(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        let values = names
            .iter()
            .enumerate()
            .map(|(i, name)| parse_cell(record.get(i).unwrap_or(""), name, row))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok((names, rows))
}
