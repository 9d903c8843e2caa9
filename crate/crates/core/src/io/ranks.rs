//! Published per-TF rank tables: a `tf` column plus one or more rank columns.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::table::{read_sniffed, Field, Table};
use super::write_table;

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub tf: String,
    /// One entry per rank column; `None` where the cell was blank.
    pub ranks: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankTable {
    pub columns: Vec<String>,
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// `(tf, rank)` pairs of one column, blanks skipped.
    pub fn present(&self, column: usize) -> impl Iterator<Item = (&str, f64)> {
        self.rows
            .iter()
            .filter_map(move |r| r.ranks[column].map(|v| (r.tf.as_str(), v)))
    }
}

/// Reads a comma- or tab-delimited rank table. Every column other than `tf`
/// is treated as a rank column.
pub fn read_rank_table(path: &Path) -> Result<RankTable> {
    let raw = read_sniffed(path)?;
    let tf_col = raw
        .columns()
        .iter()
        .position(|c| c.eq_ignore_ascii_case("tf"))
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: "tf".into(),
        })?;
    let rank_cols: Vec<usize> = (0..raw.columns().len()).filter(|&c| c != tf_col).collect();
    if rank_cols.is_empty() {
        return Err(Error::MissingColumn {
            path: path.to_path_buf(),
            column: "<rank column>".into(),
        });
    }
    let mut table = RankTable {
        columns: rank_cols.iter().map(|&c| raw.columns()[c].clone()).collect(),
        rows: Vec::new(),
    };
    let mut seen = HashSet::new();
    for (i, row) in raw.rows().iter().enumerate() {
        // header is line 1
        let lineno = i + 2;
        let tf = row[tf_col].trim().to_string();
        if tf.is_empty() {
            return Err(Error::parse(path, lineno, "empty tf symbol"));
        }
        if !seen.insert(tf.clone()) {
            return Err(Error::parse(path, lineno, format!("duplicate tf `{tf}`")));
        }
        let mut ranks = Vec::with_capacity(rank_cols.len());
        for &c in &rank_cols {
            let cell = row[c].trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                ranks.push(None);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(path, lineno, format!("non-numeric rank `{cell}` in `{}`", raw.columns()[c]))
            })?;
            if !v.is_finite() || v < 1.0 {
                return Err(Error::parse(path, lineno, format!("rank {cell}: ranks are 1-based")));
            }
            ranks.push(Some(v));
        }
        table.rows.push(RankRow { tf, ranks });
    }
    Ok(table)
}

pub fn write_rank_table(path: &Path, t: &RankTable) -> Result<()> {
    let mut cols = vec!["tf".to_string()];
    cols.extend(t.columns.iter().cloned());
    let mut out = Table::new(&cols);
    let mut rows: Vec<&RankRow> = t.rows.iter().collect();
    rows.sort_by(|a, b| a.tf.cmp(&b.tf));
    for r in rows {
        let mut fields = vec![Field::from(&r.tf)];
        fields.extend(r.ranks.iter().map(|&v| Field::from(v)));
        out.push(fields);
    }
    write_table(&out, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> Result<RankTable> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ranks.csv");
        std::fs::write(&p, body).unwrap();
        read_rank_table(&p)
    }

    #[test]
    fn blanks_are_absent() {
        let t = parse("tf,scrna_rank,avg_rank\nA,1,2.5\nB,2,\nC,3,1\n").unwrap();
        assert_eq!(t.rows.len(), 3);
        let avg = t.column("avg_rank").unwrap();
        assert_eq!(t.present(avg).count(), 2);
        assert_eq!(t.rows[1].ranks, vec![Some(2.0), None]);
    }

    #[test]
    fn tab_delimited() {
        let t = parse("TF\tscrna_rank\nA\t4\n").unwrap();
        assert_eq!(t.columns, vec!["scrna_rank"]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(parse("tf,r\nA,1\nA,2\n").unwrap_err().to_string().contains("duplicate tf"));
        assert!(parse("tf,r\nA,0\n").unwrap_err().to_string().contains("ranks are 1-based"));
        let err = parse("tf,r\nA,1\nB,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(matches!(parse("name,r\nA,1\n"), Err(Error::MissingColumn { .. })));
    }
}
