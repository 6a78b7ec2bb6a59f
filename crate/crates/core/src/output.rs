//! CSV emission with a fixed number format.
//!
//! Values with magnitude below 1e-3 or at least 1e6 are written in
//! scientific notation (`1e-6`, `2.5e9`), everything else in plain decimal.
//! Both forms use Rust's shortest round-trip representation, so parsing an
//! emitted file gives back the exact values.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = x.abs();
    if !(1e-3..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A single CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

/// Rectangular table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Inconsistent(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io {
            path: "<memory>".into(),
            reason: e.to_string(),
        };
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io {
            path: "<memory>".into(),
            reason: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("CSV output is built from UTF-8 strings"))
    }
}

/// Writes `table` to `path`, creating parent directories.
pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let text = table.to_csv_string()?;
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn number_format_rule() {
        assert_eq!(format_number(1e-6), "1e-6");
        assert_eq!(format_number(0.001), "0.001");
        assert_eq!(format_number(0.763), "0.763");
        assert_eq!(format_number(999_999.5), "999999.5");
        assert_eq!(format_number(1e6), "1e6");
        assert_eq!(format_number(-2.5e9), "-2.5e9");
        assert_eq!(format_number(0.0), "0");
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/empty.csv");
        emit_csv(&Table::new(["a", "b"]), &p).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "a,b\n");
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut t = Table::new(["a", "b"]);
        assert!(t.push(vec![1.0.into()]).is_err());
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        assert!(matches!(
            emit_csv(&Table::new(["a"]), &blocker.join("x.csv")),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn emitted_values_parse_back(values in proptest::collection::vec(-1e12f64..1e12, 1..20), tiny in 1e-15f64..1e-3) {
            let mut t = Table::new(["x", "y"]);
            for v in &values {
                t.push(vec![(*v).into(), (*v * tiny).into()]).unwrap();
            }
            let text = t.to_csv_string().unwrap();
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            for (row, v) in rdr.records().zip(&values) {
                let row = row.unwrap();
                let x: f64 = row[0].parse().unwrap();
                let y: f64 = row[1].parse().unwrap();
                prop_assert!((x - v).abs() <= 1e-12 * v.abs());
                prop_assert!((y - v * tiny).abs() <= 1e-12 * (v * tiny).abs());
            }
        }
    }
}
