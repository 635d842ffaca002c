//! Result tables and their CSV/JSON writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::Format;

/// One table cell; floats print in shortest round-trip form.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:?}"),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::F(x) => Number::from_f64(*x).map_or_else(|| Value::String(format!("{x:?}")), Value::Number),
            Cell::U(n) => Value::from(*n),
            Cell::S(s) => Value::String(s.clone()),
            Cell::B(b) => Value::Bool(*b),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::U(n as u64)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::U(n)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

pub const OK: &str = "ok";
pub const FAIL: &str = "FAIL";

/// `"ok"` or `"FAIL"` for the status column.
pub fn status(ok: bool) -> Cell {
    Cell::from(if ok { OK } else { FAIL })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    /// Rows whose `status` column reads `FAIL`.
    pub fn failures(&self) -> usize {
        let Some(col) = self.header.iter().position(|h| *h == "status") else { return 0 };
        self.rows.iter().filter(|r| r[col] == Cell::S(FAIL.into())).count()
    }

    /// Writes `<prefix>-<name>.<ext>` into `dir` and returns the path.
    pub fn write(&self, dir: &Path, prefix: &str, format: Format) -> std::io::Result<PathBuf> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{prefix}-{}.csv", self.name));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::to_csv))?;
                }
                w.flush()?;
                Ok(path)
            }
            Format::Json => {
                let path = dir.join(format!("{prefix}-{}.json", self.name));
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> =
                            self.header.iter().zip(row).map(|(h, c)| (h.to_string(), c.to_json())).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
                fs::write(&path, text + "\n")?;
                Ok(path)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_a_decimal_point_and_round_trip() {
        assert_eq!(Cell::F(2.0).to_csv(), "2.0");
        let x = 0.1 + 0.2;
        assert_eq!(Cell::F(x).to_csv().parse::<f64>().unwrap(), x);
        assert_eq!(Cell::F(f64::INFINITY).to_json(), Value::String("inf".into()));
    }

    #[test]
    fn failures_count_the_status_column() {
        let mut t = Table::new("t", &["a", "status"]);
        t.push(vec![1.0.into(), status(true)]);
        t.push(vec![2.0.into(), status(false)]);
        assert_eq!(t.failures(), 1);
        assert_eq!(Table::new("u", &["a"]).failures(), 0);
    }
}
