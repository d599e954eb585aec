//! Tabular output. Every table starts with a metadata line carrying the
//! config hash and seed, then a header (CSV) or one object per row (JSON
//! lines).

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(u64),
    S(String),
    B(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::F)
    }
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(v) => format_f64(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::I(v) => Value::from(*v),
            Cell::S(s) => Value::from(s.as_str()),
            Cell::B(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem when written to a directory.
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    /// Column values by name, for tests and summaries.
    pub fn column(&self, name: &str) -> Vec<&Cell> {
        let i = self.columns.iter().position(|c| *c == name).expect("known column");
        self.rows.iter().map(|r| &r[i]).collect()
    }

    pub fn render(&self, format: Format, config_hash: &str, seed: u64) -> Vec<u8> {
        let mut out = Vec::new();
        match format {
            Format::Csv => {
                writeln!(out, "# config_hash={config_hash} seed={seed} table={}", self.name).unwrap();
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&self.columns).unwrap();
                for r in &self.rows {
                    w.write_record(r.iter().map(Cell::text)).unwrap();
                }
                w.flush().unwrap();
            }
            Format::Json => {
                let meta = serde_json::json!({ "meta": { "config_hash": config_hash, "seed": seed, "table": self.name } });
                writeln!(out, "{meta}").unwrap();
                for r in &self.rows {
                    let obj: Map<String, Value> = self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.json())).collect();
                    writeln!(out, "{}", Value::Object(obj)).unwrap();
                }
            }
        }
        out
    }
}

/// Where tables go: stdout, or one file per table in a directory.
#[derive(Debug, Clone)]
pub enum Sink {
    Stdout,
    Dir(PathBuf),
}

impl Sink {
    pub fn emit(&self, table: &Table, format: Format, config_hash: &str, seed: u64) -> std::io::Result<()> {
        let bytes = table.render(format, config_hash, seed);
        match self {
            Sink::Stdout => {
                let mut lock = std::io::stdout().lock();
                lock.write_all(&bytes)?;
                lock.flush()
            }
            Sink::Dir(dir) => {
                std::fs::create_dir_all(dir)?;
                let ext = match format {
                    Format::Csv => "csv",
                    Format::Json => "jsonl",
                };
                let path = dir.join(format!("{}.{ext}", table.name));
                std::fs::write(&path, bytes)?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
        }
    }

    /// Resolves a path relative to the output directory (or the working
    /// directory when printing to stdout).
    pub fn path_for(&self, name: &Path) -> PathBuf {
        match self {
            Sink::Stdout => name.to_path_buf(),
            Sink::Dir(d) => d.join(name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("demo", &["u", "note", "n"]);
        t.push(vec![2.5.into(), "a, b".into(), 3u64.into()]);
        t.push(vec![1e-7.into(), Cell::Empty, 0u64.into()]);
        t
    }

    #[test]
    fn csv_has_meta_header_and_quoting() {
        let s = String::from_utf8(sample().render(Format::Csv, "abc", 7)).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# config_hash=abc seed=7 table=demo");
        assert_eq!(lines[1], "u,note,n");
        assert_eq!(lines[2], "2.5,\"a, b\",3");
        assert_eq!(lines[3], "1e-7,,0");
    }

    #[test]
    fn json_lines_mirror_rows() {
        let s = String::from_utf8(sample().render(Format::Json, "abc", 7)).unwrap();
        let lines: Vec<Value> = s.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["meta"]["seed"], 7);
        assert_eq!(lines[1]["note"], "a, b");
        assert_eq!(lines[2]["u"], 1e-7);
        assert!(lines[2]["note"].is_null());
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 5.068e-2, 1e-300, 12345.678, -2.5e20] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
