//! 10x-style MatrixMarket triplets: `matrix.mtx` (genes x cells, 1-based),
//! `barcodes.tsv` and `features.tsv`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::CountMatrix;

use super::{open_text, write_bytes};

/// Which column of `features.tsv` supplies the gene identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureColumn {
    /// Second column (gene symbol) when present, otherwise the first.
    #[default]
    Auto,
    /// 1-based column index.
    Index(usize),
}

/// Reads one identifier per line, taking the requested tab-separated column.
/// Blank lines are rejected.
pub fn read_id_list(path: &Path, column: FeatureColumn) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, line) in open_text(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            return Err(Error::parse(path, i + 1, "empty identifier line"));
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let id = match column {
            FeatureColumn::Auto => fields.get(1).copied().unwrap_or(fields[0]),
            FeatureColumn::Index(k) => *fields.get(k.wrapping_sub(1)).ok_or_else(|| {
                Error::parse(path, i + 1, format!("no column {k} in `{line}`"))
            })?,
        };
        out.push(id.to_string());
    }
    Ok(out)
}

pub fn write_id_list(path: &Path, ids: &[String]) -> Result<()> {
    let mut s = String::new();
    for id in ids {
        s.push_str(id);
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

pub fn read_mtx(matrix: &Path, barcodes: &Path, features: &Path) -> Result<CountMatrix> {
    read_mtx_with(matrix, barcodes, features, FeatureColumn::Auto)
}

/// Reads a genes x cells coordinate file and returns it transposed to
/// cells x genes.
pub fn read_mtx_with(
    matrix: &Path,
    barcodes: &Path,
    features: &Path,
    feature_column: FeatureColumn,
) -> Result<CountMatrix> {
    let cell_ids = read_id_list(barcodes, FeatureColumn::Index(1))?;
    let gene_ids = read_id_list(features, feature_column)?;

    let mut lines = open_text(matrix)?.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(matrix, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(matrix, e))?;
    let banner: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if banner.len() < 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix" {
        return Err(Error::parse(matrix, 1, "missing %%MatrixMarket matrix banner"));
    }
    if banner[2] != "coordinate" {
        return Err(Error::parse(matrix, 1, "only coordinate format is supported"));
    }
    if banner[3] != "integer" && banner[3] != "real" {
        return Err(Error::parse(matrix, 1, format!("unsupported field `{}`", banner[3])));
    }
    if banner[4] != "general" {
        return Err(Error::parse(matrix, 1, format!("unsupported symmetry `{}`", banner[4])));
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(matrix, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((n_rows, n_cols, _)) = dims else {
            if fields.len() != 3 {
                return Err(Error::parse(matrix, lineno, "expected `rows cols entries`"));
            }
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(matrix, lineno, format!("bad dimension `{s}`")))
            };
            let d = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
            if d.0 != gene_ids.len() || d.1 != cell_ids.len() {
                return Err(Error::DimensionMismatch {
                    path: matrix.to_path_buf(),
                    msg: format!(
                        "header declares {}x{} but there are {} features and {} barcodes",
                        d.0,
                        d.1,
                        gene_ids.len(),
                        cell_ids.len()
                    ),
                });
            }
            dims = Some(d);
            continue;
        };
        if fields.len() != 3 {
            return Err(Error::parse(matrix, lineno, "expected `row col value`"));
        }
        let index = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(matrix, lineno, format!("bad index `{s}`")))
        };
        let (row, col) = (index(fields[0])?, index(fields[1])?);
        if row == 0 || col == 0 || row > n_rows || col > n_cols {
            return Err(Error::IndexOutOfRange {
                path: matrix.to_path_buf(),
                line: lineno,
                row,
                col,
            });
        }
        let value = parse_count(matrix, lineno, fields[2])?;
        if !seen.insert((row, col)) {
            return Err(Error::DuplicateCoordinate {
                path: matrix.to_path_buf(),
                line: lineno,
                row,
                col,
            });
        }
        // genes x cells on disk, cells x genes in memory
        triplets.push((col - 1, row - 1, value));
    }
    let Some((_, _, n_entries)) = dims else {
        return Err(Error::parse(matrix, 1, "missing size line"));
    };
    if triplets.len() != n_entries {
        return Err(Error::DimensionMismatch {
            path: matrix.to_path_buf(),
            msg: format!("header declares {n_entries} entries, found {}", triplets.len()),
        });
    }
    CountMatrix::from_triplets(cell_ids, gene_ids, triplets)
}

fn parse_count(path: &Path, line: usize, s: &str) -> Result<u32> {
    let value: i64 = match s.parse::<i64>() {
        Ok(v) => v,
        Err(_) => {
            let f: f64 = s.parse().map_err(|_| Error::NonInteger {
                path: path.to_path_buf(),
                line,
                value: s.to_string(),
            })?;
            if !f.is_finite() || f.fract() != 0.0 || f.abs() > i64::MAX as f64 {
                return Err(Error::NonInteger {
                    path: path.to_path_buf(),
                    line,
                    value: s.to_string(),
                });
            }
            f as i64
        }
    };
    if value < 0 {
        return Err(Error::NegativeCount {
            path: path.to_path_buf(),
            line,
            value,
        });
    }
    u32::try_from(value).map_err(|_| Error::parse(path, line, format!("count {value} exceeds u32")))
}

/// Writes `m` as `matrix.mtx`, `barcodes.tsv` and `features.tsv` into `dir`.
/// Entries are emitted cell by cell, genes ascending.
pub fn write_mtx(dir: &Path, m: &CountMatrix) -> Result<()> {
    let mut s = String::with_capacity(32 + m.nnz() * 12);
    s.push_str("%%MatrixMarket matrix coordinate integer general\n");
    let _ = writeln!(s, "{} {} {}", m.n_genes(), m.n_cells(), m.nnz());
    for (cell, gene, v) in m.triplets() {
        let _ = writeln!(s, "{} {} {}", gene + 1, cell + 1, v);
    }
    write_bytes(&dir.join("matrix.mtx"), s.as_bytes())?;
    write_id_list(&dir.join("barcodes.tsv"), m.cell_ids())?;
    let mut f = String::new();
    for g in m.gene_ids() {
        let _ = writeln!(f, "{g}\t{g}\tGene Expression");
    }
    write_bytes(&dir.join("features.tsv"), f.as_bytes())
}
