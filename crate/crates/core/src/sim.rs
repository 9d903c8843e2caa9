//! Seeded synthetic pooled screen with planted TF-specific effects, a shared
//! artifact on every perturbed cell, untouched control cells, and the truth
//! needed to score the pipeline against it.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). Global quantities (gene
//! rates, planted sets, barcodes, withheld labels) are drawn from stream 0 of
//! the seed; cell `i` draws its size factor and counts from stream `i + 1`.
//! Output is therefore independent of how cells are spread across threads.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demux::{TfLabel, TfMap, BARCODE_LEN};
use crate::error::{Error, Result};
use crate::io::{self, write_bytes, write_gmt, write_rank_table, write_tfmap, Field, GeneSetLibrary, RankRow, RankTable, Table, TfMapFormat};
use crate::matrix::{merged_cell_id, CellAnnotations, CountMatrix};

/// A value given either once for all TFs or once per TF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerTf<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Copy> PerTf<T> {
    pub fn get(&self, tf: usize) -> T {
        match self {
            PerTf::All(v) => *v,
            PerTf::Each(v) => v[tf],
        }
    }

    fn check_len(&self, n_tfs: usize, field: &str) -> Result<()> {
        match self {
            PerTf::Each(v) if v.len() != n_tfs => Err(Error::Config(format!(
                "{field}: {} values for {n_tfs} TFs",
                v.len()
            ))),
            _ => Ok(()),
        }
    }

    fn values(&self, n_tfs: usize) -> Vec<T> {
        (0..n_tfs).map(|t| self.get(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_tfs: usize,
    pub cells_per_tf: PerTf<usize>,
    pub n_control_cells: usize,
    pub n_genes: usize,
    pub n_specific_per_tf: PerTf<usize>,
    pub n_artifact_genes: usize,
    pub effect_fold: PerTf<f64>,
    pub artifact_fold: f64,
    /// Log-normal parameters of per-gene base rates.
    pub base_mu: f64,
    pub base_sigma: f64,
    /// Per-cell size factors are uniform in `[library_size_min, library_size_max]`.
    pub library_size_min: f64,
    pub library_size_max: f64,
    pub frac_ambiguous: f64,
    pub frac_undetected: f64,
    /// Perturbed cells are spread round-robin over this many pool samples.
    pub n_replicates: usize,
    pub control_sample: String,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_tfs: 20,
            cells_per_tf: PerTf::All(100),
            n_control_cells: 500,
            n_genes: 2000,
            n_specific_per_tf: PerTf::All(20),
            n_artifact_genes: 200,
            effect_fold: PerTf::All(4.0),
            artifact_fold: 3.0,
            // expected library at size factor 1 equals the 10,000 normalization target
            base_mu: 5f64.ln() - 0.5,
            base_sigma: 1.0,
            library_size_min: 0.5,
            library_size_max: 1.5,
            frac_ambiguous: 0.05,
            frac_undetected: 0.05,
            n_replicates: 2,
            control_sample: "EB".into(),
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config(format!("{field}: {msg}")));
        if self.n_tfs == 0 {
            return bad("n_tfs", "must be positive");
        }
        self.cells_per_tf.check_len(self.n_tfs, "cells_per_tf")?;
        self.n_specific_per_tf.check_len(self.n_tfs, "n_specific_per_tf")?;
        self.effect_fold.check_len(self.n_tfs, "effect_fold")?;
        if self.n_control_cells == 0 {
            return bad("n_control_cells", "must be positive");
        }
        if self.n_genes == 0 {
            return bad("n_genes", "must be positive");
        }
        // a fold of exactly 1 gives a null simulation
        if self.effect_fold.values(self.n_tfs).iter().any(|&f| !(f >= 1.0 && f.is_finite())) {
            return bad("effect_fold", "must be >= 1");
        }
        if !(self.artifact_fold >= 1.0 && self.artifact_fold.is_finite()) {
            return bad("artifact_fold", "must be >= 1");
        }
        if !(self.base_sigma >= 0.0 && self.base_mu.is_finite() && self.base_sigma.is_finite()) {
            return bad("base_sigma", "must be finite and non-negative");
        }
        if !(self.library_size_min > 0.0 && self.library_size_min <= self.library_size_max) {
            return bad("library_size_min", "need 0 < library_size_min <= library_size_max");
        }
        for (field, v) in [("frac_ambiguous", self.frac_ambiguous), ("frac_undetected", self.frac_undetected)] {
            if !(0.0..1.0).contains(&v) {
                return bad(field, "must be in [0, 1)");
            }
        }
        if self.frac_ambiguous + self.frac_undetected >= 1.0 {
            return bad("frac_undetected", "withheld fractions must sum below 1");
        }
        if self.n_replicates == 0 {
            return bad("n_replicates", "must be positive");
        }
        if self.control_sample.is_empty() || self.control_sample.contains('_') {
            return bad("control_sample", "must be non-empty without `_`");
        }
        let needed = self.n_artifact_genes + self.n_specific_per_tf.values(self.n_tfs).iter().sum::<usize>();
        if needed > self.n_genes {
            return Err(Error::GeneBudget {
                needed,
                available: self.n_genes,
            });
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tf_names(&self) -> Vec<String> {
        let width = self.n_tfs.to_string().len().max(2);
        (1..=self.n_tfs).map(|i| format!("TF{i:0width$}")).collect()
    }

    pub fn gene_names(&self) -> Vec<String> {
        let width = self.n_genes.to_string().len();
        (1..=self.n_genes).map(|i| format!("G{i:0width$}")).collect()
    }

    pub fn pool_samples(&self) -> Vec<String> {
        (1..=self.n_replicates).map(|r| format!("pool_r{r}")).collect()
    }
}

/// What a cell really is, as opposed to what the TF map reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TruthLabel {
    Control,
    Tf(String),
    Ambiguous,
    Undetected,
}

impl TruthLabel {
    pub fn as_str(&self) -> &str {
        match self {
            TruthLabel::Control => "control",
            TruthLabel::Tf(_) => "tf",
            TruthLabel::Ambiguous => "ambiguous",
            TruthLabel::Undetected => "undetected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub specific: BTreeMap<String, BTreeSet<String>>,
    pub artifact: BTreeSet<String>,
    /// Aligned with the matrix rows.
    pub labels: Vec<TruthLabel>,
    /// TF actually expressed by each perturbed cell, including withheld ones.
    pub true_tf: Vec<Option<String>>,
    pub size_factor: Vec<f64>,
    pub base_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedScreen {
    pub config: SimConfig,
    pub counts: CountMatrix,
    pub annotations: CellAnnotations,
    pub tfmap: TfMap,
    pub truth: SimTruth,
    /// Raw droplet barcode of each cell (without sample prefix or suffix).
    pub barcodes: Vec<String>,
}

fn random_barcode(rng: &mut ChaCha8Rng) -> String {
    const BASES: [char; 4] = ['A', 'C', 'G', 'T'];
    (0..BARCODE_LEN).map(|_| BASES[rng.random_range(0..4)]).collect()
}

fn cell_rng(seed: u64, cell: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64 + 1);
    rng
}

pub fn simulate_screen(cfg: &SimConfig) -> Result<SimulatedScreen> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let genes = cfg.gene_names();
    let tfs = cfg.tf_names();

    let lognormal = LogNormal::new(cfg.base_mu, cfg.base_sigma)
        .map_err(|e| Error::Config(format!("base rate: {e}")))?;
    let base_rate: Vec<f64> = (0..cfg.n_genes).map(|_| lognormal.sample(&mut rng)).collect();

    let mut order: Vec<usize> = (0..cfg.n_genes).collect();
    order.shuffle(&mut rng);
    let mut cursor = order.into_iter();
    let artifact_idx: Vec<usize> = cursor.by_ref().take(cfg.n_artifact_genes).collect();
    let specific_idx: Vec<Vec<usize>> = (0..cfg.n_tfs)
        .map(|t| cursor.by_ref().take(cfg.n_specific_per_tf.get(t)).collect())
        .collect();

    // per-gene multiplier lookup: artifact set and, per TF, its planted set
    let mut is_artifact = vec![false; cfg.n_genes];
    for &g in &artifact_idx {
        is_artifact[g] = true;
    }

    // cell layout: controls, then each TF's cells
    let mut cell_tf: Vec<Option<usize>> = vec![None; cfg.n_control_cells];
    for t in 0..cfg.n_tfs {
        cell_tf.extend(std::iter::repeat_n(Some(t), cfg.cells_per_tf.get(t)));
    }
    let n_cells = cell_tf.len();
    let perturbed: Vec<usize> = (cfg.n_control_cells..n_cells).collect();

    let n_amb = (cfg.frac_ambiguous * perturbed.len() as f64).round() as usize;
    let n_und = (cfg.frac_undetected * perturbed.len() as f64).round() as usize;
    let mut withheld = perturbed.clone();
    withheld.shuffle(&mut rng);
    let amb: HashSet<usize> = withheld[..n_amb].iter().copied().collect();
    let und: HashSet<usize> = withheld[n_amb..n_amb + n_und].iter().copied().collect();

    let mut seen = HashSet::with_capacity(n_cells);
    let barcodes: Vec<String> = (0..n_cells)
        .map(|_| loop {
            let bc = random_barcode(&mut rng);
            if seen.insert(bc.clone()) {
                break bc;
            }
        })
        .collect();

    let fold: Vec<f64> = cfg.effect_fold.values(cfg.n_tfs);
    let mut specific_mult: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cfg.n_tfs];
    for (t, idx) in specific_idx.iter().enumerate() {
        specific_mult[t] = idx.iter().map(|&g| (g, fold[t])).collect();
    }

    let rows: Vec<(f64, Vec<(usize, u32)>)> = (0..n_cells)
        .into_par_iter()
        .map(|c| {
            let mut rng = cell_rng(cfg.seed, c);
            let s = if cfg.library_size_min == cfg.library_size_max {
                cfg.library_size_min
            } else {
                rng.random_range(cfg.library_size_min..=cfg.library_size_max)
            };
            let mut rate: Vec<f64> = base_rate.iter().map(|&l| s * l).collect();
            if let Some(t) = cell_tf[c] {
                for (g, r) in rate.iter_mut().enumerate() {
                    if is_artifact[g] {
                        *r *= cfg.artifact_fold;
                    }
                }
                for &(g, f) in &specific_mult[t] {
                    rate[g] *= f;
                }
            }
            let entries = rate
                .iter()
                .enumerate()
                .filter_map(|(g, &r)| {
                    let k = Poisson::new(r).expect("positive rate").sample(&mut rng) as u32;
                    (k > 0).then_some((g, k))
                })
                .collect();
            (s, entries)
        })
        .collect();

    let pools = cfg.pool_samples();
    let mut annotations = CellAnnotations::default();
    let mut cell_ids = Vec::with_capacity(n_cells);
    let mut labels = Vec::with_capacity(n_cells);
    let mut true_tf = Vec::with_capacity(n_cells);
    let mut tfmap = TfMap::default();
    for c in 0..n_cells {
        let sample = match cell_tf[c] {
            None => cfg.control_sample.clone(),
            Some(_) => pools[(c - cfg.n_control_cells) % cfg.n_replicates].clone(),
        };
        cell_ids.push(merged_cell_id(&sample, &format!("{}-1", barcodes[c])));
        annotations.push(&sample, &sample);
        let label = match cell_tf[c] {
            None => TruthLabel::Control,
            Some(_) if amb.contains(&c) => TruthLabel::Ambiguous,
            Some(_) if und.contains(&c) => TruthLabel::Undetected,
            Some(t) => TruthLabel::Tf(tfs[t].clone()),
        };
        let map_label = match &label {
            TruthLabel::Control => None,
            TruthLabel::Ambiguous => Some(TfLabel::Ambiguous),
            TruthLabel::Undetected => Some(TfLabel::Undetected),
            TruthLabel::Tf(name) => Some(TfLabel::Tf {
                gene: name.clone(),
                isoform: Some(format!("NM_{:06}", cell_tf[c].unwrap() + 1)),
            }),
        };
        if let Some(l) = map_label {
            tfmap.insert(barcodes[c].clone(), l);
        }
        labels.push(label);
        true_tf.push(cell_tf[c].map(|t| tfs[t].clone()));
    }

    let mut triplets = Vec::new();
    let mut size_factor = Vec::with_capacity(n_cells);
    for (c, (s, entries)) in rows.into_iter().enumerate() {
        size_factor.push(s);
        triplets.extend(entries.into_iter().map(|(g, k)| (c, g, k)));
    }
    let counts = CountMatrix::from_triplets(cell_ids, genes.clone(), triplets)?;

    let name = |idx: &[usize]| idx.iter().map(|&g| genes[g].clone()).collect::<BTreeSet<_>>();
    let truth = SimTruth {
        specific: tfs.iter().cloned().zip(specific_idx.iter().map(|i| name(i))).collect(),
        artifact: name(&artifact_idx),
        labels,
        true_tf,
        size_factor,
        base_rate,
    };
    Ok(SimulatedScreen {
        config: cfg.clone(),
        counts,
        annotations,
        tfmap,
        truth,
        barcodes,
    })
}

impl SimulatedScreen {
    /// Synthetic published ranking: TFs ordered by planted effect strength
    /// (`n_specific * ln(fold) * sqrt(cells)`), rank 1 strongest. The second
    /// column leaves every fourth TF blank.
    pub fn rank_table(&self) -> RankTable {
        let cfg = &self.config;
        let tfs = cfg.tf_names();
        let mut strength: Vec<(f64, &String)> = tfs
            .iter()
            .enumerate()
            .map(|(t, name)| {
                let s = cfg.n_specific_per_tf.get(t) as f64
                    * cfg.effect_fold.get(t).ln()
                    * (cfg.cells_per_tf.get(t) as f64).sqrt();
                (s, name)
            })
            .collect();
        strength.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
        let rows = strength
            .iter()
            .enumerate()
            .map(|(i, (_, tf))| {
                let rank = (i + 1) as f64;
                RankRow {
                    tf: (*tf).clone(),
                    ranks: vec![Some(rank), (i % 4 != 3).then_some(rank)],
                }
            })
            .collect();
        RankTable {
            columns: vec!["scrna_rank".into(), "avg_rank".into()],
            rows,
        }
    }

    /// Gene-set library with each TF's planted targets, chunks of the
    /// artifact set, and random decoy sets.
    pub fn gene_sets(&self) -> GeneSetLibrary {
        let mut lib = GeneSetLibrary::new("synthetic_sets");
        for (tf, genes) in &self.truth.specific {
            if !genes.is_empty() {
                lib.sets.insert(format!("{tf}_TARGETS"), genes.clone());
            }
        }
        let artifact: Vec<&String> = self.truth.artifact.iter().collect();
        for (i, chunk) in artifact.chunks(25).enumerate() {
            lib.sets.insert(
                format!("ARTIFACT_MODULE_{:02}", i + 1),
                chunk.iter().map(|g| (*g).clone()).collect(),
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(u64::MAX);
        let genes = self.counts.gene_ids();
        for i in 0..20 {
            let size = rng.random_range(10..=40).min(genes.len());
            let set = rand::seq::index::sample(&mut rng, genes.len(), size)
                .into_iter()
                .map(|g| genes[g].clone())
                .collect();
            lib.sets.insert(format!("RANDOM_SET_{:02}", i + 1), set);
        }
        lib
    }

    /// Writes one 10x-style directory per sample plus the TF map, truth
    /// tables, a synthetic rank table and gene-set library, and a pipeline
    /// configuration that points at all of them.
    pub fn write_dataset(&self, out: &Path) -> Result<()> {
        let cfg = &self.config;
        let mut samples = vec![cfg.control_sample.clone()];
        samples.extend(cfg.pool_samples());
        for sample in &samples {
            let mask: Vec<bool> = self.annotations.sample.iter().map(|s| s == sample).collect();
            let sub = self.counts.select_cells(&mask);
            let local: Vec<String> = sub
                .cell_ids()
                .iter()
                .map(|id| id[sample.len() + 1..].to_string())
                .collect();
            let sub = CountMatrix::from_triplets(local, sub.gene_ids().to_vec(), sub.triplets().collect())?;
            io::write_mtx(&out.join("samples").join(sample), &sub)?;
        }
        write_tfmap(&out.join("tfmap.csv"), &self.tfmap, &TfMapFormat::default())?;
        write_rank_table(&out.join("published_ranks.csv"), &self.rank_table())?;
        write_gmt(&out.join("genesets.gmt"), &self.gene_sets())?;

        let mut cells = Table::new(&["cell", "sample", "label", "true_tf", "size_factor"]);
        let mut order: Vec<usize> = (0..self.counts.n_cells()).collect();
        order.sort_by(|&a, &b| self.counts.cell_ids()[a].cmp(&self.counts.cell_ids()[b]));
        for c in order {
            cells.push(vec![
                Field::from(&self.counts.cell_ids()[c]),
                Field::from(&self.annotations.sample[c]),
                self.truth.labels[c].as_str().into(),
                self.truth.true_tf[c].clone().into(),
                self.truth.size_factor[c].into(),
            ]);
        }
        io::write_table(&cells, &out.join("truth").join("cells.csv"))?;

        let mut genes = Table::new(&["gene", "role", "tf"]);
        let mut roles: BTreeMap<&str, (&str, Option<&str>)> = BTreeMap::new();
        for g in &self.truth.artifact {
            roles.insert(g, ("artifact", None));
        }
        for (tf, set) in &self.truth.specific {
            for g in set {
                roles.insert(g, ("specific", Some(tf)));
            }
        }
        for (g, (role, tf)) in roles {
            genes.push(vec![g.into(), role.into(), tf.into()]);
        }
        io::write_table(&genes, &out.join("truth").join("genes.csv"))?;

        let mut conf = String::new();
        let _ = writeln!(conf, "# generated by `tfscreen simulate` (seed {})", cfg.seed);
        let dirs: Vec<String> = samples.iter().map(|s| format!("\"samples/{s}\"")).collect();
        let _ = writeln!(conf, "sample_dirs = [{}]", dirs.join(", "));
        let _ = writeln!(conf, "control_samples = \"^{}$\"", cfg.control_sample);
        let _ = writeln!(conf, "tfmap = \"tfmap.csv\"");
        let _ = writeln!(conf, "gmt = [\"genesets.gmt\"]");
        let _ = writeln!(conf, "rank_table = \"published_ranks.csv\"");
        let _ = writeln!(conf, "output_dir = \"results\"");
        write_bytes(&out.join("pipeline.toml"), conf.as_bytes())
    }
}
