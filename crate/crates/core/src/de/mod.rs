//! Per-gene differential expression between cell groups.
//!
//! Every gene of the expression matrix is tested with a Wilcoxon rank-sum
//! test, p-values are BH-adjusted within the comparison, and genes are called
//! significant when `|log2fc| > lfc_threshold` and `q < alpha`.

mod background;
mod ranksum;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{Field, Table};
use crate::matrix::{ColumnMajor, ExprMatrix};
use crate::stats::bh_adjust;

pub use background::{
    background_table, background_threshold, identify_background, subtract_background, BackgroundSet,
};
pub use ranksum::{rank_sum_sparse, rank_sum_z, RankSumResult};

pub const DEFAULT_EPS: f64 = 1e-9;

/// `log2((expm1(mean_a) + eps) / (expm1(mean_b) + eps))` on log1p-scale means.
pub fn log2fc(mean_a: f64, mean_b: f64, eps: f64) -> f64 {
    ((mean_a.exp_m1() + eps) / (mean_b.exp_m1() + eps)).log2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeParams {
    pub lfc_threshold: f64,
    pub alpha: f64,
    pub tie_correct: bool,
    pub eps: f64,
}

impl DeParams {
    /// Condition-level thresholds: `|log2fc| > 1`, `q < 0.05`.
    pub fn condition() -> Self {
        Self {
            lfc_threshold: 1.0,
            alpha: 0.05,
            tie_correct: true,
            eps: DEFAULT_EPS,
        }
    }

    /// Relaxed per-TF thresholds: `|log2fc| > 0.5`, `q < 0.05`.
    pub fn per_tf() -> Self {
        Self {
            lfc_threshold: 0.5,
            ..Self::condition()
        }
    }

    pub fn is_significant(&self, log2fc: f64, q: f64) -> bool {
        log2fc.abs() > self.lfc_threshold && q < self.alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DERecord {
    pub gene: String,
    pub group: String,
    pub log2fc: f64,
    pub z: f64,
    pub p: f64,
    pub q: f64,
    pub significant: bool,
    pub in_background: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DETable {
    pub group: String,
    /// `"EB"`-style control label, `"rest"`, or another named cell set.
    pub reference: String,
    pub params: DeParams,
    /// One record per tested gene, in gene order.
    pub records: Vec<DERecord>,
}

pub const DE_COLUMNS: [&str; 7] = ["gene", "log2fc", "z", "pval", "qval", "significant", "in_background"];

impl DETable {
    pub fn significant_genes(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .filter(|r| r.significant)
            .map(|r| r.gene.clone())
            .collect()
    }

    pub fn n_significant(&self) -> usize {
        self.records.iter().filter(|r| r.significant).count()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&DE_COLUMNS);
        let mut recs: Vec<&DERecord> = self.records.iter().collect();
        recs.sort_by(|a, b| a.gene.cmp(&b.gene));
        for r in recs {
            t.push(vec![
                Field::from(&r.gene),
                r.log2fc.into(),
                r.z.into(),
                r.p.into(),
                r.q.into(),
                r.significant.into(),
                r.in_background.into(),
            ]);
        }
        t
    }

    /// Rebuilds a table written by [`DETable::to_table`].
    pub fn from_table(t: &Table, group: &str, reference: &str, params: DeParams, path: &Path) -> Result<Self> {
        let col: Vec<usize> = DE_COLUMNS
            .iter()
            .map(|c| t.require(c, path))
            .collect::<Result<_>>()?;
        let mut records = Vec::with_capacity(t.len());
        for (i, row) in t.rows().iter().enumerate() {
            let line = i + 2;
            let num = |k: usize| -> Result<f64> {
                row[col[k]]
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("bad number `{}`", row[col[k]])))
            };
            let flag = |k: usize| -> Result<bool> {
                row[col[k]]
                    .parse::<bool>()
                    .map_err(|_| Error::parse(path, line, format!("bad flag `{}`", row[col[k]])))
            };
            records.push(DERecord {
                gene: row[col[0]].clone(),
                group: group.to_string(),
                log2fc: num(1)?,
                z: num(2)?,
                p: num(3)?,
                q: num(4)?,
                significant: flag(5)?,
                in_background: flag(6)?,
            });
        }
        Ok(Self {
            group: group.to_string(),
            reference: reference.to_string(),
            params,
            records,
        })
    }
}

/// Precomputed per-gene view of an expression matrix for repeated tests.
pub struct DeEngine<'a> {
    expr: &'a ExprMatrix,
    columns: ColumnMajor<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    None,
    Group,
    Reference,
}

impl<'a> DeEngine<'a> {
    pub fn new(expr: &'a ExprMatrix) -> Self {
        Self {
            expr,
            columns: expr.to_columns(),
        }
    }

    pub fn expr(&self) -> &ExprMatrix {
        self.expr
    }

    /// Resolves cell ids to row indices.
    pub fn indices<S: AsRef<str>>(&self, cells: &[S]) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = self.expr.cell_index();
        cells
            .iter()
            .map(|c| {
                index
                    .get(c.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownCell(c.as_ref().to_string()))
            })
            .collect()
    }

    /// Tests `group` against `reference` (row indices) for every gene.
    pub fn compare(
        &self,
        group_name: &str,
        group: &[usize],
        reference_name: &str,
        reference: &[usize],
        params: &DeParams,
    ) -> Result<DETable> {
        if group.is_empty() {
            return Err(Error::EmptyGroup(group_name.to_string()));
        }
        if reference.is_empty() {
            return Err(Error::EmptyGroup(reference_name.to_string()));
        }
        let mut side = vec![Side::None; self.expr.n_cells()];
        for &c in group {
            side[c] = Side::Group;
        }
        for &c in reference {
            if side[c] == Side::Group {
                return Err(Error::OverlappingGroups(self.expr.cell_ids()[c].clone()));
            }
            side[c] = Side::Reference;
        }
        let n_a = side.iter().filter(|&&s| s == Side::Group).count();
        let n_b = side.iter().filter(|&&s| s == Side::Reference).count();

        let per_gene: Vec<(f64, RankSumResult)> = (0..self.expr.n_genes())
            .into_par_iter()
            .map(|g| {
                let (cells, vals) = self.columns.column(g);
                let mut a = Vec::new();
                let mut b = Vec::new();
                for (&c, &v) in cells.iter().zip(vals) {
                    match side[c as usize] {
                        Side::Group => a.push(v),
                        Side::Reference => b.push(v),
                        Side::None => {}
                    }
                }
                let mean_a = a.iter().sum::<f64>() / n_a as f64;
                let mean_b = b.iter().sum::<f64>() / n_b as f64;
                let lfc = log2fc(mean_a, mean_b, params.eps);
                let test = rank_sum_sparse(&mut a, n_a, &mut b, n_b, params.tie_correct);
                (lfc, test)
            })
            .collect();

        let pvals: Vec<f64> = per_gene.iter().map(|(_, t)| t.p).collect();
        let qvals = bh_adjust(&pvals)?;
        let records = per_gene
            .into_iter()
            .zip(qvals)
            .zip(self.expr.gene_ids())
            .map(|(((lfc, t), q), gene)| DERecord {
                gene: gene.clone(),
                group: group_name.to_string(),
                log2fc: lfc,
                z: t.z,
                p: t.p,
                q,
                significant: params.is_significant(lfc, q),
                in_background: false,
            })
            .collect();
        Ok(DETable {
            group: group_name.to_string(),
            reference: reference_name.to_string(),
            params: *params,
            records,
        })
    }
}

/// What a group is compared against.
#[derive(Debug, Clone)]
pub enum Reference<'c, S> {
    /// An explicit, named cell set (e.g. the pooled control cells).
    Cells { name: &'c str, cells: &'c [S] },
    /// Every cell of `pool` not in the group (one-vs-rest).
    Rest { pool: &'c [S] },
}

pub fn differential_expression<S: AsRef<str>>(
    e: &ExprMatrix,
    group_name: &str,
    group_cells: &[S],
    reference: Reference<'_, S>,
    params: &DeParams,
) -> Result<DETable> {
    let engine = DeEngine::new(e);
    let group = engine.indices(group_cells)?;
    let (name, reference) = match reference {
        Reference::Cells { name, cells } => (name, engine.indices(cells)?),
        Reference::Rest { pool } => {
            let in_group: BTreeSet<usize> = group.iter().copied().collect();
            let rest = engine
                .indices(pool)?
                .into_iter()
                .filter(|c| !in_group.contains(c))
                .collect();
            ("rest", rest)
        }
    };
    engine.compare(group_name, &group, name, &reference, params)
}

/// One row of the per-TF summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct DeSummaryRow {
    pub tf: String,
    pub n_cells: usize,
    pub n_specific_degs: usize,
    pub n_up: usize,
    pub n_down: usize,
    pub n_ovr_degs: Option<usize>,
    pub top_up_genes: Vec<String>,
}

/// Summarizes a background-subtracted table; top genes ranked by log2fc.
pub fn summarize(
    tf: &str,
    n_cells: usize,
    specific: &DETable,
    one_vs_rest: Option<&DETable>,
    top_n: usize,
) -> DeSummaryRow {
    let sig: Vec<&DERecord> = specific.records.iter().filter(|r| r.significant).collect();
    let mut up: Vec<&DERecord> = sig.iter().copied().filter(|r| r.log2fc > 0.0).collect();
    up.sort_by(|a, b| {
        b.log2fc
            .partial_cmp(&a.log2fc)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.gene.cmp(&b.gene))
    });
    DeSummaryRow {
        tf: tf.to_string(),
        n_cells,
        n_specific_degs: sig.len(),
        n_up: up.len(),
        n_down: sig.len() - up.len(),
        n_ovr_degs: one_vs_rest.map(DETable::n_significant),
        top_up_genes: up.iter().take(top_n).map(|r| r.gene.clone()).collect(),
    }
}

pub fn summary_table(rows: &[DeSummaryRow]) -> Table {
    let mut t = Table::new(&[
        "tf",
        "n_cells",
        "n_specific_degs",
        "n_up",
        "n_down",
        "n_ovr_degs",
        "top_up_genes",
    ]);
    let mut rows: Vec<&DeSummaryRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.tf.cmp(&b.tf));
    for r in rows {
        t.push(vec![
            Field::from(&r.tf),
            r.n_cells.into(),
            r.n_specific_degs.into(),
            r.n_up.into(),
            r.n_down.into(),
            r.n_ovr_degs.into(),
            r.top_up_genes.join(";").into(),
        ]);
    }
    t
}

/// Per-group significant gene sets, keyed by group.
pub fn significant_sets(tables: &[DETable]) -> BTreeMap<String, BTreeSet<String>> {
    tables
        .iter()
        .map(|t| (t.group.clone(), t.significant_genes()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn log2fc_examples() {
        assert_eq!(log2fc(0.7, 0.7, DEFAULT_EPS), 0.0);
        assert!((log2fc(3f64.ln(), 2f64.ln(), DEFAULT_EPS) - 1.0).abs() < 1e-8);
        assert_eq!(log2fc(0.0, 0.0, DEFAULT_EPS), 0.0);
    }

    #[test]
    fn table_matches_direct_tests() {
        let ids: Vec<String> = cells(6, "c");
        let e = ExprMatrix::from_dense(
            ids.clone(),
            vec!["up".into(), "flat".into(), "zero".into()],
            &[
                vec![3.0, 1.0, 0.0],
                vec![2.5, 0.0, 0.0],
                vec![2.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.1, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        let t = differential_expression(
            &e,
            "g",
            &ids[..3],
            Reference::Cells { name: "EB", cells: &ids[3..] },
            &DeParams::per_tf(),
        )
        .unwrap();
        assert_eq!(t.reference, "EB");
        let direct = rank_sum_z(&[3.0, 2.5, 2.0], &[0.0, 0.1, 0.0], true).unwrap();
        assert!((t.records[0].z - direct.z).abs() < 1e-12);
        assert!(t.records[0].log2fc > 0.0);
        let zero = &t.records[2];
        assert_eq!((zero.z, zero.p, zero.log2fc), (0.0, 1.0, 0.0));
        assert!(!zero.significant);
    }

    #[test]
    fn rejects_overlap_and_empty() {
        let ids = cells(4, "c");
        let e = ExprMatrix::from_dense(ids.clone(), vec!["g".into()], &[vec![1.0], vec![0.0], vec![2.0], vec![0.0]]).unwrap();
        let p = DeParams::per_tf();
        let err = differential_expression(&e, "a", &ids[..2], Reference::Cells { name: "b", cells: &ids[1..] }, &p);
        assert!(matches!(err, Err(Error::OverlappingGroups(ref c)) if c == "c1"));
        let err = differential_expression(&e, "a", &ids[..0], Reference::Cells { name: "b", cells: &ids[1..] }, &p);
        assert!(matches!(err, Err(Error::EmptyGroup(_))));
        let err = differential_expression(&e, "a", &ids[..], Reference::Rest { pool: &ids[..] }, &p);
        assert!(matches!(err, Err(Error::EmptyGroup(ref g)) if g == "rest"));
    }

    #[test]
    fn table_round_trip() {
        let ids = cells(4, "c");
        let e = ExprMatrix::from_dense(ids.clone(), vec!["g1".into(), "g2".into()], &[vec![1.0, 0.0], vec![0.5, 0.2], vec![0.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let p = DeParams::per_tf();
        let t = differential_expression(&e, "A", &ids[..2], Reference::Cells { name: "EB", cells: &ids[2..] }, &p).unwrap();
        let back = DETable::from_table(&t.to_table(), "A", "EB", p, Path::new("x")).unwrap();
        assert_eq!(back, t);
    }
}
