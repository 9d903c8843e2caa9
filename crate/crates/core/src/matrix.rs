//! Sparse cells x genes matrices with stable identifiers.
//!
//! Storage is compressed sparse rows (one row per cell). Column reductions go
//! through [`ColumnMajor`], a transposed copy built on demand. Explicit zeros
//! are never stored, so the sparsity pattern of a [`CountMatrix`] carries over
//! unchanged to the [`ExprMatrix`] derived from it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::demux::DemuxStatus;
use crate::error::{Error, Result};

/// Element type of a [`SparseMatrix`].
pub trait Value: Copy + PartialEq + Send + Sync + std::fmt::Debug {
    const ZERO: Self;
}

impl Value for u32 {
    const ZERO: Self = 0;
}

impl Value for f64 {
    const ZERO: Self = 0.0;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    cell_ids: Vec<String>,
    gene_ids: Vec<String>,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<T>,
}

/// Raw UMI counts.
pub type CountMatrix = SparseMatrix<u32>;

/// Normalized `ln(1 + x)` expression.
pub type ExprMatrix = SparseMatrix<f64>;

fn check_unique(kind: &'static str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

impl<T: Value> SparseMatrix<T> {
    /// Builds a matrix from `(cell, gene, value)` triplets in any order.
    /// Zero values are dropped.
    pub fn from_triplets(
        cell_ids: Vec<String>,
        gene_ids: Vec<String>,
        mut triplets: Vec<(usize, usize, T)>,
    ) -> Result<Self> {
        check_unique("cell", &cell_ids)?;
        check_unique("gene", &gene_ids)?;
        let (n_rows, n_cols) = (cell_ids.len(), gene_ids.len());
        for &(r, c, _) in &triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::EntryOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        for w in triplets.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::DuplicateEntry {
                    row: w[0].0,
                    col: w[0].1,
                });
            }
        }
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if v == T::ZERO {
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c as u32);
            data.push(v);
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            cell_ids,
            gene_ids,
            indptr,
            indices,
            data,
        })
    }

    /// Builds a matrix from dense rows. Mostly useful in tests.
    pub fn from_dense(cell_ids: Vec<String>, gene_ids: Vec<String>, rows: &[Vec<T>]) -> Result<Self> {
        if rows.len() != cell_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows for {} cells",
                rows.len(),
                cell_ids.len()
            )));
        }
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != gene_ids.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {r} has {} values for {} genes",
                    row.len(),
                    gene_ids.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                triplets.push((r, c, v));
            }
        }
        Self::from_triplets(cell_ids, gene_ids, triplets)
    }

    pub fn n_cells(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    /// Gene indices and values of the stored entries of one cell, genes ascending.
    pub fn row(&self, cell: usize) -> (&[u32], &[T]) {
        let span = self.indptr[cell]..self.indptr[cell + 1];
        (&self.indices[span.clone()], &self.data[span])
    }

    pub fn get(&self, cell: usize, gene: usize) -> T {
        let (idx, vals) = self.row(cell);
        match idx.binary_search(&(gene as u32)) {
            Ok(k) => vals[k],
            Err(_) => T::ZERO,
        }
    }

    /// Iterates stored entries as `(cell, gene, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_cells()).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::ZERO; self.n_genes()]; self.n_cells()];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    pub fn cell_index(&self) -> HashMap<&str, usize> {
        self.cell_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    /// Keeps the cells named in `keep`, in this matrix's original order.
    pub fn slice_cells<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let index = self.cell_index();
        let mut wanted = vec![false; self.n_cells()];
        for id in keep {
            let id = id.as_ref();
            match index.get(id) {
                Some(&i) => wanted[i] = true,
                None => return Err(Error::UnknownCell(id.to_string())),
            }
        }
        Ok(self.select_cells(&wanted))
    }

    /// Keeps the cells whose mask entry is `true`, order preserved.
    pub fn select_cells(&self, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), self.n_cells());
        let mut cell_ids = Vec::new();
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for (r, _) in mask.iter().enumerate().filter(|(_, &k)| k) {
            let (idx, vals) = self.row(r);
            cell_ids.push(self.cell_ids[r].clone());
            indices.extend_from_slice(idx);
            data.extend_from_slice(vals);
            indptr.push(indices.len());
        }
        Self {
            cell_ids,
            gene_ids: self.gene_ids.clone(),
            indptr,
            indices,
            data,
        }
    }

    /// Keeps the genes whose mask entry is `true`, order preserved.
    pub fn select_genes(&self, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), self.n_genes());
        let mut remap = vec![u32::MAX; self.n_genes()];
        let mut gene_ids = Vec::new();
        for (g, _) in mask.iter().enumerate().filter(|(_, &k)| k) {
            remap[g] = gene_ids.len() as u32;
            gene_ids.push(self.gene_ids[g].clone());
        }
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..self.n_cells() {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                let m = remap[c as usize];
                if m != u32::MAX {
                    indices.push(m);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            cell_ids: self.cell_ids.clone(),
            gene_ids,
            indptr,
            indices,
            data,
        }
    }

    /// Applies `f` to every stored value, keeping the sparsity pattern.
    pub fn map_rows<U: Value>(&self, mut f: impl FnMut(usize, T) -> U) -> SparseMatrix<U> {
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.n_cells() {
            let (_, vals) = self.row(r);
            data.extend(vals.iter().map(|&v| f(r, v)));
        }
        SparseMatrix {
            cell_ids: self.cell_ids.clone(),
            gene_ids: self.gene_ids.clone(),
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data,
        }
    }

    /// Transposed copy for per-gene access.
    pub fn to_columns(&self) -> ColumnMajor<T> {
        let n_genes = self.n_genes();
        let mut indptr = vec![0usize; n_genes + 1];
        for &c in &self.indices {
            indptr[c as usize + 1] += 1;
        }
        for g in 0..n_genes {
            indptr[g + 1] += indptr[g];
        }
        let mut next = indptr.clone();
        let mut cells = vec![0u32; self.nnz()];
        let mut data = vec![T::ZERO; self.nnz()];
        for (r, c, v) in self.triplets() {
            let slot = &mut next[c];
            cells[*slot] = r as u32;
            data[*slot] = v;
            *slot += 1;
        }
        ColumnMajor {
            n_cells: self.n_cells(),
            indptr,
            cells,
            data,
        }
    }
}

impl CountMatrix {
    pub fn row_sum(&self, cell: usize) -> u64 {
        self.row(cell).1.iter().map(|&v| v as u64).sum()
    }

    /// Number of cells with a nonzero count, per gene.
    pub fn cells_per_gene(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.n_genes()];
        for &c in &self.indices {
            out[c as usize] += 1;
        }
        out
    }

    /// Total counts per gene.
    pub fn gene_sums(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.n_genes()];
        for (_, c, v) in self.triplets() {
            out[c] += v as u64;
        }
        out
    }
}

/// Compressed sparse columns: stored entries grouped by gene, cells ascending.
#[derive(Debug, Clone)]
pub struct ColumnMajor<T> {
    n_cells: usize,
    indptr: Vec<usize>,
    cells: Vec<u32>,
    data: Vec<T>,
}

impl<T: Value> ColumnMajor<T> {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_genes(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn column(&self, gene: usize) -> (&[u32], &[T]) {
        let span = self.indptr[gene]..self.indptr[gene + 1];
        (&self.cells[span.clone()], &self.data[span])
    }
}

/// Per-group mean expression, groups in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeans {
    pub groups: Vec<String>,
    pub gene_ids: Vec<String>,
    /// `means[group][gene]`
    pub means: Vec<Vec<f64>>,
}

/// Mean over the cells of each group, zeros included in the denominator.
pub fn group_means(e: &ExprMatrix, groups: &BTreeMap<String, Vec<String>>) -> Result<GroupMeans> {
    let index = e.cell_index();
    let mut means = Vec::with_capacity(groups.len());
    for (name, cells) in groups {
        if cells.is_empty() {
            return Err(Error::EmptyGroup(name.clone()));
        }
        let mut sums = vec![0.0; e.n_genes()];
        for id in cells {
            let &r = index
                .get(id.as_str())
                .ok_or_else(|| Error::UnknownCell(id.clone()))?;
            let (idx, vals) = e.row(r);
            for (&g, &v) in idx.iter().zip(vals) {
                sums[g as usize] += v;
            }
        }
        let n = cells.len() as f64;
        means.push(sums.into_iter().map(|s| s / n).collect());
    }
    Ok(GroupMeans {
        groups: groups.keys().cloned().collect(),
        gene_ids: e.gene_ids().to_vec(),
        means,
    })
}

/// Per-cell QC quantities computed on raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub genes_detected: Vec<usize>,
    pub total_counts: Vec<u64>,
    pub pct_mito: Vec<f64>,
}

/// Gene ids starting with `prefix` (e.g. `"MT-"`).
pub fn mito_genes_by_prefix(gene_ids: &[String], prefix: &str) -> HashSet<String> {
    gene_ids
        .iter()
        .filter(|g| g.starts_with(prefix))
        .cloned()
        .collect()
}

pub fn per_cell_stats(m: &CountMatrix, mito_genes: &HashSet<String>) -> CellStats {
    let gene_index: HashMap<&str, usize> = m
        .gene_ids()
        .iter()
        .enumerate()
        .map(|(i, g)| (g.as_str(), i))
        .collect();
    let mut is_mito = vec![false; m.n_genes()];
    let mut absent: Vec<&str> = Vec::new();
    for g in mito_genes {
        match gene_index.get(g.as_str()) {
            Some(&i) => is_mito[i] = true,
            None => absent.push(g),
        }
    }
    if !absent.is_empty() {
        absent.sort_unstable();
        log::warn!(
            "{} mitochondrial gene(s) not in matrix, ignored: {}",
            absent.len(),
            absent.join(",")
        );
    }

    let n = m.n_cells();
    let mut stats = CellStats {
        genes_detected: Vec::with_capacity(n),
        total_counts: Vec::with_capacity(n),
        pct_mito: Vec::with_capacity(n),
    };
    for r in 0..n {
        let (idx, vals) = m.row(r);
        let total: u64 = vals.iter().map(|&v| v as u64).sum();
        let mito: u64 = idx
            .iter()
            .zip(vals)
            .filter(|(&g, _)| is_mito[g as usize])
            .map(|(_, &v)| v as u64)
            .sum();
        stats.genes_detected.push(vals.len());
        stats.total_counts.push(total);
        stats.pct_mito.push(if total == 0 {
            0.0
        } else {
            100.0 * mito as f64 / total as f64
        });
    }
    stats
}

/// Per-cell metadata aligned with the rows of a matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellAnnotations {
    pub sample: Vec<String>,
    pub replicate: Vec<String>,
    pub tf_label: Vec<Option<String>>,
    pub status: Vec<Option<DemuxStatus>>,
}

impl CellAnnotations {
    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn check_aligned<T: Value>(&self, m: &SparseMatrix<T>) -> Result<()> {
        let n = m.n_cells();
        for len in [
            self.sample.len(),
            self.replicate.len(),
            self.tf_label.len(),
            self.status.len(),
        ] {
            if len != n {
                return Err(Error::LabelLengthMismatch {
                    labels: len,
                    cells: n,
                });
            }
        }
        Ok(())
    }

    pub fn push(&mut self, sample: &str, replicate: &str) {
        self.sample.push(sample.to_string());
        self.replicate.push(replicate.to_string());
        self.tf_label.push(None);
        self.status.push(None);
    }

    /// Row subset under a mask, order preserved.
    pub fn select(&self, mask: &[bool]) -> Self {
        let pick = |i: &usize| mask[*i];
        let idx: Vec<usize> = (0..self.len()).filter(pick).collect();
        Self {
            sample: idx.iter().map(|&i| self.sample[i].clone()).collect(),
            replicate: idx.iter().map(|&i| self.replicate[i].clone()).collect(),
            tf_label: idx.iter().map(|&i| self.tf_label[i].clone()).collect(),
            status: idx.iter().map(|&i| self.status[i]).collect(),
        }
    }
}

/// Cell id of a cell from `sample` after merging.
pub fn merged_cell_id(sample: &str, cell: &str) -> String {
    format!("{sample}_{cell}")
}

/// Concatenates samples along the cell axis with an outer join on genes.
///
/// The merged gene axis is the sorted union of all inputs; genes absent from
/// a sample read as zero for its cells. Cell ids become `<sample>_<cell>`.
pub fn merge_samples(samples: Vec<(String, CountMatrix)>) -> Result<(CountMatrix, CellAnnotations)> {
    let mut names = HashSet::new();
    for (name, _) in &samples {
        if !names.insert(name.as_str()) {
            return Err(Error::DuplicateSample(name.clone()));
        }
    }
    let union: BTreeSet<&str> = samples
        .iter()
        .flat_map(|(_, m)| m.gene_ids().iter().map(String::as_str))
        .collect();
    let gene_ids: Vec<String> = union.iter().map(|g| g.to_string()).collect();
    let position: HashMap<&str, u32> = union
        .iter()
        .enumerate()
        .map(|(i, g)| (*g, i as u32))
        .collect();

    let mut cell_ids = Vec::new();
    let mut annotations = CellAnnotations::default();
    let mut indptr = vec![0usize];
    let mut indices = Vec::new();
    let mut data = Vec::new();
    for (name, m) in &samples {
        let remap: Vec<u32> = m.gene_ids().iter().map(|g| position[g.as_str()]).collect();
        for r in 0..m.n_cells() {
            cell_ids.push(merged_cell_id(name, &m.cell_ids()[r]));
            annotations.push(name, name);
            let (idx, vals) = m.row(r);
            let mut row: Vec<(u32, u32)> = idx
                .iter()
                .zip(vals)
                .map(|(&g, &v)| (remap[g as usize], v))
                .collect();
            row.sort_unstable_by_key(|&(g, _)| g);
            for (g, v) in row {
                indices.push(g);
                data.push(v);
            }
            indptr.push(indices.len());
        }
    }
    check_unique("cell", &cell_ids)?;
    let merged = SparseMatrix {
        cell_ids,
        gene_ids,
        indptr,
        indices,
        data,
    };
    Ok((merged, annotations))
}
