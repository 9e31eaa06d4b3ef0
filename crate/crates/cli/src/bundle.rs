//! Result tables, residual reports and their serialization.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Residual {
    pub fn new(value: f64, tol: f64) -> Self {
        Self {
            value,
            tol,
            pass: value.is_finite() && value <= tol,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub schema: u32,
    pub name: Option<String>,
    pub route: String,
    pub engine: String,
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultBundle {
    pub metadata: Metadata,
    pub tables: BTreeMap<String, Table>,
    pub residuals: BTreeMap<String, Residual>,
    pub pass: bool,
}

impl ResultBundle {
    pub fn new(metadata: Metadata) -> Self {
        Self {
            metadata,
            tables: BTreeMap::new(),
            residuals: BTreeMap::new(),
            pass: true,
        }
    }

    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.to_string(), table);
    }

    pub fn residual(&mut self, name: &str, value: f64, tol: f64) {
        let r = Residual::new(value, tol);
        self.pass &= r.pass;
        self.residuals.insert(name.to_string(), r);
    }

    pub fn failures(&self) -> Vec<&str> {
        self.residuals
            .iter()
            .filter(|(_, r)| !r.pass)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Writes the bundle under `dir` and returns the files written.
///
/// CSV: one `<table>.csv` per table, `residuals.csv` and `metadata.json`.
/// JSON: a single `result.json`.
pub fn emit(bundle: &ResultBundle, format: Format, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    match format {
        Format::Json => {
            let path = dir.join("result.json");
            write_json(&path, bundle)?;
            Ok(vec![path])
        }
        Format::Csv => {
            let mut written = Vec::new();
            for (name, table) in &bundle.tables {
                let path = dir.join(format!("{name}.csv"));
                write_csv(&path, &table.columns, table.rows.iter().map(|r| r.iter().map(f64::to_string)))?;
                written.push(path);
            }
            let path = dir.join("residuals.csv");
            let rows = bundle.residuals.iter().map(|(name, r)| {
                [name.clone(), r.value.to_string(), r.tol.to_string(), r.pass.to_string()].into_iter()
            });
            write_csv(&path, &["name", "value", "tol", "pass"], rows)?;
            written.push(path);
            let path = dir.join("metadata.json");
            write_json(&path, &bundle.metadata)?;
            written.push(path);
            Ok(written)
        }
    }
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("bundle serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_csv<H, R>(path: &Path, header: &[H], rows: impl Iterator<Item = R>) -> Result<(), CliError>
where
    H: AsRef<str>,
    R: Iterator<Item = String>,
{
    let io = |e: csv::Error| {
        let kind = std::io::Error::other(e.to_string());
        CliError::io(path, kind)
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header.iter().map(AsRef::as_ref)).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
