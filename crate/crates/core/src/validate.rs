//! Rank correlation of per-TF DEG counts against published TF rankings.
//!
//! Published ranks are ordinal with 1 the strongest TF, so agreement shows up
//! as a negative rho.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::io::{Field, RankTable, Table};
use crate::stats::{average_ranks, student_t_two_sided};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

/// Two-sided p for a Spearman rho via the t approximation with `n - 2` df.
pub fn spearman_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    student_t_two_sided(t, df)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "spearman inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InvalidArgument("spearman needs at least 3 pairs".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("spearman inputs must be finite".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::InvalidArgument("correlation undefined for a constant vector".into()));
    }
    let mut rho = pearson(&average_ranks(x), &average_ranks(y)).clamp(-1.0, 1.0);
    if 1.0 - rho.abs() < 1e-12 {
        rho = rho.signum();
    }
    Ok(SpearmanResult {
        rho,
        p: spearman_p(rho, x.len()),
        n: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedRow {
    pub tf: String,
    pub deg_count: usize,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnValidation {
    pub rank_column: String,
    pub n_matched: usize,
    /// `None` when the column was skipped (too few matches or a constant input).
    pub result: Option<SpearmanResult>,
    pub rows: Vec<MatchedRow>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub columns: Vec<ColumnValidation>,
}

pub const MIN_MATCHED: usize = 3;

/// Inner-joins DEG counts with each rank column on TF symbol and correlates
/// them. With `uppercase` set, symbols are compared case-insensitively.
pub fn compare_to_published(
    deg_counts: &BTreeMap<String, usize>,
    ranks: &RankTable,
    uppercase: bool,
) -> ValidationReport {
    let key = |s: &str| if uppercase { s.to_uppercase() } else { s.to_string() };
    let counts: BTreeMap<String, (&String, usize)> =
        deg_counts.iter().map(|(tf, &n)| (key(tf), (tf, n))).collect();
    let mut report = ValidationReport::default();
    for (c, name) in ranks.columns.iter().enumerate() {
        let mut rows: Vec<MatchedRow> = ranks
            .present(c)
            .filter_map(|(tf, rank)| {
                counts.get(&key(tf)).map(|&(orig, n)| MatchedRow {
                    tf: orig.clone(),
                    deg_count: n,
                    rank,
                })
            })
            .collect();
        rows.sort_by(|a, b| a.tf.cmp(&b.tf));
        let result = if rows.len() < MIN_MATCHED {
            log::warn!("rank column `{name}`: only {} TF(s) matched; skipped", rows.len());
            None
        } else {
            let x: Vec<f64> = rows.iter().map(|r| r.deg_count as f64).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.rank).collect();
            match spearman(&x, &y) {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("rank column `{name}`: {e}; skipped");
                    None
                }
            }
        };
        report.columns.push(ColumnValidation {
            rank_column: name.clone(),
            n_matched: rows.len(),
            result,
            rows,
        });
    }
    report
}

impl ValidationReport {
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&["rank_column", "n_matched", "rho", "pval"]);
        let mut cols: Vec<&ColumnValidation> = self.columns.iter().collect();
        cols.sort_by(|a, b| a.rank_column.cmp(&b.rank_column));
        for c in cols {
            t.push(vec![
                Field::from(&c.rank_column),
                c.n_matched.into(),
                c.result.map(|r| r.rho).into(),
                c.result.map(|r| r.p).into(),
            ]);
        }
        t
    }

    pub fn matched_table(&self) -> Table {
        let mut t = Table::new(&["rank_column", "tf", "deg_count", "rank"]);
        let mut cols: Vec<&ColumnValidation> = self.columns.iter().collect();
        cols.sort_by(|a, b| a.rank_column.cmp(&b.rank_column));
        for c in cols {
            for r in &c.rows {
                t.push(vec![
                    Field::from(&c.rank_column),
                    Field::from(&r.tf),
                    r.deg_count.into(),
                    r.rank.into(),
                ]);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::RankRow;

    #[test]
    fn perfect_inversion() {
        let r = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!((r.rho, r.p), (-1.0, 0.0));
    }

    #[test]
    fn reported_p_values_follow_from_rho_and_n() {
        assert!((spearman_p(-0.316, 61) - 0.013).abs() <= 0.002);
        assert!((spearman_p(-0.219, 46) - 0.14).abs() <= 0.01);
    }

    #[test]
    fn errors() {
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn ties_use_average_ranks() {
        let r = spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        // ranks (1.5,1.5,3,4) vs (1,2,3,4)
        let expect = pearson(&[1.5, 1.5, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!((r.rho - expect).abs() < 1e-15);
    }

    fn table(rows: &[(&str, Option<f64>)]) -> RankTable {
        RankTable {
            columns: vec!["scrna_rank".into()],
            rows: rows
                .iter()
                .map(|&(tf, r)| RankRow { tf: tf.into(), ranks: vec![r] })
                .collect(),
        }
    }

    #[test]
    fn join_semantics() {
        let counts: BTreeMap<String, usize> =
            [("A", 40), ("B", 30), ("C", 20), ("D", 10)].iter().map(|&(k, v)| (k.to_string(), v)).collect();
        let ranks = table(&[("A", Some(1.0)), ("B", Some(2.0)), ("C", Some(3.0)), ("D", Some(4.0))]);
        let rep = compare_to_published(&counts, &ranks, false);
        assert_eq!(rep.columns[0].result.unwrap().rho, -1.0);

        let missing = table(&[("A", Some(1.0)), ("B", Some(2.0)), ("C", Some(3.0)), ("X", Some(4.0))]);
        let rep = compare_to_published(&counts, &missing, false);
        assert_eq!(rep.columns[0].n_matched, counts.len() - 1);

        let blank = table(&[("A", Some(1.0)), ("B", None), ("c", Some(3.0))]);
        let rep = compare_to_published(&counts, &blank, false);
        assert_eq!(rep.columns[0].n_matched, 1);
        assert!(rep.columns[0].result.is_none());
        let rep = compare_to_published(&counts, &blank, true);
        assert_eq!(rep.columns[0].n_matched, 2);
        assert_eq!(rep.columns[0].rows[1].tf, "C");
    }
}
