//! Tables, their CSV/JSON encodings, and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    /// Quoted in CSV; used for exact and extended-precision values.
    Text(String),
    Bool(bool),
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        Cell::Float(x.unwrap_or(f64::NAN))
    }
}

fn float_csv(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => float_csv(*x),
            Cell::Text(s) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Float(_) => Value::Null,
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for row in &self.rows {
                    s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
                    .collect();
                let mut s =
                    serde_json::to_string_pretty(&json!({ "columns": self.columns, "rows": rows }))
                        .expect("table serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// Sibling path for the manifest: `data.csv` -> `data.csv.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn manifest(
    subcommand: &str,
    config: Value,
    derived: Value,
    table: &Table,
    format: Format,
) -> Value {
    json!({
        "tool": "phantomlab",
        "cli_version": env!("CARGO_PKG_VERSION"),
        "library_version": phantomlab::VERSION,
        "subcommand": subcommand,
        "config": config,
        "derived": derived,
        "format": format,
        "columns": table.columns,
        "rows": table.rows.len(),
    })
}

/// Data to `out` (manifest alongside), or data to stdout and the manifest
/// to stderr.
pub fn emit(
    table: &Table,
    format: Format,
    out: Option<&Path>,
    manifest: &Value,
) -> std::io::Result<()> {
    let data = table.render(format);
    let mut man = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    man.push('\n');
    match out {
        Some(p) => {
            std::fs::write(p, data)?;
            std::fs::write(manifest_path(p), man)
        }
        None => {
            std::io::stdout().write_all(data.as_bytes())?;
            std::io::stderr().write_all(man.as_bytes())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_cells() {
        let mut t = Table::new(&["a", "b", "c", "d"]);
        t.push(vec![
            Cell::Int(3),
            Cell::Float(0.1),
            Cell::Text("1/3".into()),
            Cell::Float(f64::NAN),
        ]);
        assert_eq!(
            t.render(Format::Csv),
            "a,b,c,d\n3,1.0000000000000001e-1,\"1/3\",nan\n"
        );
    }

    #[test]
    fn json_round_trip() {
        let mut t = Table::new(&["x"]);
        t.push(vec![Cell::Float(2.5)]);
        let v: Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(v["rows"][0][0], json!(2.5));
    }

    #[test]
    fn manifest_sits_next_to_data() {
        assert_eq!(
            manifest_path(Path::new("/tmp/x/run.csv")),
            PathBuf::from("/tmp/x/run.csv.manifest.json")
        );
    }
}
