//! Comma-separated result tables (RFC 4180 quoting, header row).

use std::path::Path;

use crate::error::{Error, Result};

use super::{open_text, write_bytes};

/// A cell value before formatting.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Empty,
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Str(s.to_string())
    }
}

impl From<String> for Field {
    fn from(s: String) -> Self {
        Field::Str(s)
    }
}

impl From<&String> for Field {
    fn from(s: &String) -> Self {
        Field::Str(s.clone())
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v as i64)
    }
}

impl From<i64> for Field {
    fn from(v: i64) -> Self {
        Field::Int(v)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Empty, Into::into)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // fold -0.0 into 0
        return "0".to_string();
    }
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    format!("{v:?}")
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Str(s) => s.clone(),
            Field::Int(v) => v.to_string(),
            Field::Float(v) => format_float(*v),
            Field::Bool(b) => b.to_string(),
            Field::Empty => String::new(),
        }
    }
}

/// A header plus rows of already-rendered strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row. Panics when the row width differs from the header.
    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match columns {:?}",
            self.columns
        );
        self.rows.push(row.iter().map(Field::render).collect());
    }

    pub fn sort_rows_by(&mut self, compare: impl FnMut(&Vec<String>, &Vec<String>) -> std::cmp::Ordering) {
        self.rows.sort_by(compare);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Index of `name`, or a `MissingColumn` error attributed to `path`.
    pub fn require(&self, name: &str, path: &Path) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn write_table(table: &Table, path: &Path) -> Result<()> {
    write_bytes(path, &table.to_csv_bytes())
}

/// Reads a comma-separated table with a header row.
pub fn read_table(path: &Path) -> Result<Table> {
    read_delimited(path, b',')
}

pub(crate) fn read_delimited(path: &Path, delimiter: u8) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(open_text(path)?);
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { columns, rows })
}

/// Sniffs tab vs comma from the header line.
pub(crate) fn read_sniffed(path: &Path) -> Result<Table> {
    use std::io::BufRead;
    let mut first = String::new();
    open_text(path)?
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let delim = if first.contains('\t') { b'\t' } else { b',' };
    read_delimited(path, delim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_when_empty() {
        let t = Table::new(&["gene", "pval"]);
        assert_eq!(t.to_csv_bytes(), b"gene,pval\n");
    }

    #[test]
    fn quotes_when_needed() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["a,b".into(), "say \"hi\"".into()]);
        t.push(vec!["line\nbreak".into(), Field::Empty]);
        let s = String::from_utf8(t.to_csv_bytes()).unwrap();
        assert_eq!(s, "a,b\n\"a,b\",\"say \"\"hi\"\"\"\n\"line\nbreak\",\n");
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 2.5e-17, 123456.789, -7.0, f64::MIN_POSITIVE, 1e20] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(3.0), "3");
    }

    #[test]
    fn write_read_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["k", "v"]);
        t.push(vec!["x,y".into(), 0.25.into()]);
        t.push(vec!["z".into(), true.into()]);
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_table(&t, &p1).unwrap();
        write_table(&t, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let back = read_table(&p1).unwrap();
        assert_eq!(back, t);
    }
}
