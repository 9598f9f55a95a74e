//! Tabular and JSON emission with fixed numeric formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// 12 significant digits, scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Writes `<dir>/<stem>.csv` or `<dir>/<stem>.json` and returns the path.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf, CliError> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
                w.write_record(&self.columns).map_err(|e| CliError::io(&path, e))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(|&x| fmt_num(x)))
                        .map_err(|e| CliError::io(&path, e))?;
                }
                w.flush().map_err(|e| CliError::io(&path, e))?;
                Ok(path)
            }
            Format::Json => {
                let path = dir.join(format!("{stem}.json"));
                let body: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(k, name)| {
                        let col: Vec<serde_json::Value> = self
                            .rows
                            .iter()
                            .map(|r| serde_json::Value::String(fmt_num(r[k])))
                            .collect();
                        (name.to_string(), serde_json::Value::Array(col))
                    })
                    .collect();
                write_json(&path, &body)?;
                Ok(path)
            }
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
