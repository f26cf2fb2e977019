//! CSV tables with a one-line JSON metadata header.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

use crate::config::RunConfig;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(usize),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // shortest representation that parses back to the same double
            Cell::Float(x) => write!(f, "{x:?}"),
            Cell::Int(n) => write!(f, "{n}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Command-specific metadata appended to the header.
    pub extra: Value,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new(), extra: Value::Null }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Float values of one column; non-float cells are skipped.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter_map(|r| match r[i] {
                Cell::Float(x) => Some(x),
                Cell::Int(n) => Some(n as f64),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, cfg: &RunConfig, mut w: W) -> io::Result<()> {
        let header = json!({
            "version": ARTIFACT_VERSION,
            "config": cfg,
            "extra": self.extra,
        });
        writeln!(w, "# {header}")?;
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    }
}

/// Metadata header, column names and raw records of a CSV written by [`Table::write_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub header: Value,
    pub columns: Vec<String>,
    pub records: Vec<Vec<String>>,
}

pub fn read_csv<R: BufRead>(r: R) -> io::Result<ParsedCsv> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| bad("empty file"))??;
    let meta = first.strip_prefix("# ").ok_or_else(|| bad("missing metadata line"))?;
    let header: Value = serde_json::from_str(meta).map_err(|e| bad(&e.to_string()))?;
    let columns = lines.next().ok_or_else(|| bad("missing column line"))??.split(',').map(String::from).collect();
    let records = lines.map(|l| l.map(|l| l.split(',').map(String::from).collect())).collect::<io::Result<_>>()?;
    Ok(ParsedCsv { header, columns, records })
}
