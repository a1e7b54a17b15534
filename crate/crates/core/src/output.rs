//! Artifact writers: CSV tables with `#` metadata lines, pretty JSON with
//! sorted keys, and the schema checks run on every file before exit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Floats are written with 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Float,
    Int,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => fmt_f(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        Cell::Float(x.unwrap_or(f64::NAN))
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[(&str, ColumnKind)]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns
                .iter()
                .map(|(n, k)| Column {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    /// All-float table.
    pub fn floats(names: &[&str]) -> Self {
        Self::new(&names.iter().map(|n| (*n, ColumnKind::Float)).collect::<Vec<_>>())
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{file}: {message}")]
pub struct SchemaError {
    pub file: String,
    pub message: String,
}

fn schema_error(path: &Path, message: impl Into<String>) -> SchemaError {
    SchemaError {
        file: path.display().to_string(),
        message: message.into(),
    }
}

/// Re-read a CSV file and check header, row widths and cell types.
pub fn validate_csv(path: &Path, columns: &[Column]) -> Result<usize, SchemaError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| schema_error(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| schema_error(path, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    let expected: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
    if names != expected {
        return Err(schema_error(path, format!("header {names:?}, expected {expected:?}")));
    }
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema_error(path, format!("row {i}: {e}")))?;
        for (cell, col) in record.iter().zip(columns) {
            let ok = match col.kind {
                ColumnKind::Float => cell.parse::<f64>().is_ok(),
                ColumnKind::Int => cell.parse::<i64>().is_ok(),
                ColumnKind::Text => true,
            };
            if !ok {
                return Err(schema_error(path, format!("row {i}: column {} holds '{cell}'", col.name)));
            }
        }
        rows += 1;
    }
    Ok(rows)
}

/// Pretty JSON; objects come out with sorted keys.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let v = serde_json::to_value(value)?;
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &v)?;
    writeln!(out)?;
    out.flush()
}

/// Re-read a JSON file and check it is an object carrying `required` keys.
pub fn validate_json(path: &Path, required: &[&str]) -> Result<serde_json::Value, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| schema_error(path, e.to_string()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| schema_error(path, e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| schema_error(path, "top level is not an object"))?;
    for key in required {
        if !obj.contains_key(*key) {
            return Err(schema_error(path, format!("missing key '{key}'")));
        }
    }
    Ok(v)
}

/// Strip `#` lines; what determinism comparisons look at.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, value: Option<f64>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            value: value.filter(|v| v.is_finite()),
            detail: detail.into(),
        }
    }

    /// `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, Some(value), format!("{} <= {}", fmt_f(value), fmt_f(bound)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub status: String,
    pub exit_code: u8,
    pub seed: u64,
    pub wall_time_s: f64,
    pub versions: BTreeMap<String, String>,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub error: Option<ErrorRecord>,
}

pub const MANIFEST_KEYS: [&str; 10] = [
    "experiment",
    "status",
    "exit_code",
    "seed",
    "wall_time_s",
    "versions",
    "config",
    "checks",
    "files",
    "error",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&[("x", ColumnKind::Float), ("n", ColumnKind::Int), ("s", ColumnKind::Text)]).meta("seed", 3);
        t.push(vec![0.1.into(), 2usize.into(), "a, b".into()]);
        t.push(vec![f64::NAN.into(), 3usize.into(), "ok".into()]);
        t.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# seed=3\nx,n,s\n1.0000000000000001e-1,2,\"a, b\"\n"), "{text}");
        assert_eq!(validate_csv(&path, &t.columns).unwrap(), 2);
        let wrong = Table::floats(&["x", "n", "s"]);
        assert!(validate_csv(&path, &wrong.columns).is_err());
        assert_eq!(csv_body(&text).lines().count(), 3);
    }

    #[test]
    fn json_keys_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.json");
        let mut m = std::collections::HashMap::new();
        m.insert("zeta", 1);
        m.insert("alpha", 2);
        write_json(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
        assert!(validate_json(&path, &["alpha"]).is_ok());
        assert!(validate_json(&path, &["beta"]).is_err());
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_f(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
