//! Cell/gene quality filtering and library-size normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CellStats, CountMatrix, ExprMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcConfig {
    pub min_genes_per_cell: usize,
    pub max_pct_mito: f64,
    pub min_cells_per_gene: usize,
    pub target_sum: f64,
}

impl Default for QcConfig {
    fn default() -> Self {
        Self {
            min_genes_per_cell: 200,
            max_pct_mito: 10.0,
            min_cells_per_gene: 3,
            target_sum: 10_000.0,
        }
    }
}

impl QcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_genes_per_cell == 0 {
            return Err(Error::Config("min_genes must be positive".into()));
        }
        if self.min_cells_per_gene == 0 {
            return Err(Error::Config("min_cells must be positive".into()));
        }
        if !(self.max_pct_mito > 0.0 && self.max_pct_mito <= 100.0) {
            return Err(Error::Config("max_pct_mito must be in (0, 100]".into()));
        }
        if !(self.target_sum > 0.0 && self.target_sum.is_finite()) {
            return Err(Error::Config("target_sum must be positive".into()));
        }
        Ok(())
    }
}

/// Mask of cells passing QC. Both thresholds are inclusive.
pub fn cell_mask(stats: &CellStats, cfg: &QcConfig) -> Vec<bool> {
    stats
        .genes_detected
        .iter()
        .zip(&stats.pct_mito)
        .map(|(&g, &mt)| g >= cfg.min_genes_per_cell && mt <= cfg.max_pct_mito)
        .collect()
}

/// `stats` must have been computed from `m`.
pub fn filter_cells(m: &CountMatrix, stats: &CellStats, cfg: &QcConfig) -> CountMatrix {
    assert_eq!(stats.genes_detected.len(), m.n_cells(), "stats not computed from this matrix");
    let out = m.select_cells(&cell_mask(stats, cfg));
    if out.n_cells() == 0 && m.n_cells() > 0 {
        log::warn!("no cells passed QC ({} in)", m.n_cells());
    }
    out
}

/// Keeps genes detected in at least `min_cells_per_gene` cells.
pub fn filter_genes(m: &CountMatrix, cfg: &QcConfig) -> CountMatrix {
    let mask: Vec<bool> = m
        .cells_per_gene()
        .into_iter()
        .map(|n| n >= cfg.min_cells_per_gene)
        .collect();
    m.select_genes(&mask)
}

/// `ln(1 + count * target_sum / total)` per stored entry.
pub fn normalize_log1p(m: &CountMatrix, cfg: &QcConfig) -> Result<ExprMatrix> {
    let mut scale = Vec::with_capacity(m.n_cells());
    for cell in 0..m.n_cells() {
        let total = m.row_sum(cell);
        if total == 0 {
            return Err(Error::ZeroLibrary {
                cell: m.cell_ids()[cell].clone(),
            });
        }
        scale.push(cfg.target_sum / total as f64);
    }
    Ok(m.map_rows(|cell, v| (v as f64 * scale[cell]).ln_1p()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::per_cell_stats;
    use std::collections::HashSet;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn thresholds_are_inclusive() {
        let stats = CellStats {
            genes_detected: vec![200, 199, 300, 300],
            total_counts: vec![1000; 4],
            pct_mito: vec![10.0, 0.0, 10.1, 0.0],
        };
        assert_eq!(cell_mask(&stats, &QcConfig::default()), vec![true, false, false, true]);
    }

    #[test]
    fn boundary_cell_from_counts() {
        // 200 genes, 20 of 200 counts mitochondrial -> exactly 10%
        let mut genes = ids("G", 180);
        genes.extend((0..20).map(|i| format!("MT-{i}")));
        let m = CountMatrix::from_dense(vec!["c".into()], genes, &[vec![1; 200]]).unwrap();
        let mito: HashSet<String> = m.gene_ids().iter().filter(|g| g.starts_with("MT-")).cloned().collect();
        let stats = per_cell_stats(&m, &mito);
        assert_eq!(stats.pct_mito[0], 10.0);
        assert_eq!(filter_cells(&m, &stats, &QcConfig::default()).n_cells(), 1);
    }

    #[test]
    fn gene_filter() {
        let m = CountMatrix::from_dense(
            ids("c", 3),
            ids("g", 3),
            &[vec![1, 1, 0], vec![1, 1, 0], vec![1, 0, 0]],
        )
        .unwrap();
        let f = filter_genes(&m, &QcConfig::default());
        assert_eq!(f.gene_ids(), &["g0"]);
        let full = CountMatrix::from_dense(ids("c", 3), ids("g", 1), &[vec![1], vec![2], vec![3]]).unwrap();
        assert_eq!(filter_genes(&full, &QcConfig::default()), full);
    }

    #[test]
    fn normalization_example() {
        let m = CountMatrix::from_dense(vec!["c".into()], ids("g", 4), &[vec![1, 1, 2, 0]]).unwrap();
        let e = normalize_log1p(&m, &QcConfig::default()).unwrap();
        let row = &e.to_dense()[0];
        assert!((row[0] - 2501f64.ln()).abs() < 1e-12);
        assert!((row[2] - 5001f64.ln()).abs() < 1e-12);
        assert!((row[0] - 7.8244).abs() < 1e-4);
        assert!((row[2] - 8.5174).abs() < 1e-4);
        assert_eq!(row[3], 0.0);
        assert_eq!(e.nnz(), 3);
    }

    #[test]
    fn scale_factor_one() {
        let cfg = QcConfig { target_sum: 10.0, ..QcConfig::default() };
        let m = CountMatrix::from_dense(vec!["c".into()], ids("g", 2), &[vec![3, 7]]).unwrap();
        let e = normalize_log1p(&m, &cfg).unwrap();
        assert_eq!(e.to_dense()[0], vec![4f64.ln(), 8f64.ln()]);
    }

    #[test]
    fn zero_cell_rejected() {
        let m = CountMatrix::from_dense(ids("c", 2), ids("g", 1), &[vec![1], vec![0]]).unwrap();
        let err = normalize_log1p(&m, &QcConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ZeroLibrary { ref cell } if cell == "c1"));
    }

    #[test]
    fn config_validation() {
        assert!(QcConfig::default().validate().is_ok());
        let bad = QcConfig { max_pct_mito: 120.0, ..QcConfig::default() };
        assert!(bad.validate().is_err());
    }
}
