use std::path::{Path, PathBuf};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::de::{DeParams, DEFAULT_EPS};
use crate::enrich::{GseaParams, OraParams};
use crate::error::{Error, Result};
use crate::io::{FeatureColumn, TfMapFormat};
use crate::qc::QcConfig;

/// Flat pipeline configuration. Every key has the published default, so a
/// file naming only the inputs reproduces the reference settings. Relative
/// paths resolve against the directory holding the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// One 10x-style directory per sample; the directory name is the sample name.
    pub sample_dirs: Vec<PathBuf>,
    pub tfmap: Option<PathBuf>,
    pub gmt: Vec<PathBuf>,
    pub rank_table: Option<PathBuf>,
    pub output_dir: PathBuf,

    /// Regex over sample names selecting the control (EB) samples.
    pub control_samples: String,
    /// 1-based column of features.tsv holding gene ids; 0 picks column 2 when present.
    pub feature_column: usize,
    pub mito_prefix: String,

    pub min_genes: usize,
    pub max_pct_mito: f64,
    pub min_cells: usize,
    pub target_sum: f64,

    pub condition_lfc: f64,
    pub pertf_lfc: f64,
    pub alpha: f64,
    pub tie_correct: bool,
    pub log2fc_eps: f64,

    pub background_fraction: f64,
    pub min_cells_per_tf: usize,
    pub top_genes: usize,

    pub min_degs_for_ora: usize,
    pub ora_min_set: usize,
    pub ora_max_set: usize,
    pub ora_q: f64,

    pub gsea_n_perm: usize,
    pub gsea_seed: u64,
    pub gsea_weight: f64,
    pub gsea_min_set: usize,
    pub gsea_max_set: usize,

    pub tfmap_barcode_column: String,
    pub tfmap_label_column: String,
    pub isoform_delimiter: char,
    /// Regexes stripped from merged cell ids to recover the droplet barcode.
    pub barcode_prefix: String,
    pub barcode_suffix: String,

    /// Compare TF symbols case-insensitively when validating.
    pub uppercase_tf_symbols: bool,
    /// Refuse to re-run a step whose inputs changed since it last completed.
    pub strict: bool,

    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let qc = QcConfig::default();
        let gsea = GseaParams::default();
        let ora = OraParams::default();
        Self {
            sample_dirs: Vec::new(),
            tfmap: None,
            gmt: Vec::new(),
            rank_table: None,
            output_dir: PathBuf::from("results"),
            control_samples: "^EB".into(),
            feature_column: 0,
            mito_prefix: "MT-".into(),
            min_genes: qc.min_genes_per_cell,
            max_pct_mito: qc.max_pct_mito,
            min_cells: qc.min_cells_per_gene,
            target_sum: qc.target_sum,
            condition_lfc: 1.0,
            pertf_lfc: 0.5,
            alpha: 0.05,
            tie_correct: true,
            log2fc_eps: DEFAULT_EPS,
            background_fraction: 0.70,
            min_cells_per_tf: 20,
            top_genes: 10,
            min_degs_for_ora: 5,
            ora_min_set: ora.min_set,
            ora_max_set: ora.max_set,
            ora_q: ora.q_threshold,
            gsea_n_perm: gsea.n_perm,
            gsea_seed: gsea.seed,
            gsea_weight: gsea.weight,
            gsea_min_set: gsea.min_set,
            gsea_max_set: gsea.max_set,
            tfmap_barcode_column: "barcode".into(),
            tfmap_label_column: "tf".into(),
            isoform_delimiter: '|',
            barcode_prefix: "^.*_".into(),
            barcode_suffix: r"-\d+$".into(),
            uppercase_tf_symbols: false,
            strict: false,
            base_dir: PathBuf::from("."),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config(format!("{key}: {msg}")));
        self.qc().validate()?;
        for (key, v) in [
            ("condition_lfc", self.condition_lfc),
            ("pertf_lfc", self.pertf_lfc),
            ("log2fc_eps", self.log2fc_eps),
            ("gsea_weight", self.gsea_weight),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(key, "must be positive");
            }
        }
        for (key, v) in [("alpha", self.alpha), ("ora_q", self.ora_q)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(key, "must be in (0, 1]");
            }
        }
        if !(self.background_fraction > 0.0 && self.background_fraction <= 1.0) {
            return bad("background_fraction", "must be in (0, 1]");
        }
        if self.min_cells_per_tf == 0 {
            return bad("min_cells_per_tf", "must be positive");
        }
        if self.gsea_n_perm == 0 {
            return bad("gsea_n_perm", "must be positive");
        }
        if self.ora_min_set > self.ora_max_set {
            return bad("ora_min_set", "exceeds ora_max_set");
        }
        if self.gsea_min_set > self.gsea_max_set {
            return bad("gsea_min_set", "exceeds gsea_max_set");
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir", "must not be empty");
        }
        self.control_regex()?;
        self.extractor_patterns_compile()?;
        Ok(())
    }

    fn extractor_patterns_compile(&self) -> Result<()> {
        crate::demux::BarcodeExtractor::new(self.barcode_prefix_opt(), self.barcode_suffix_opt()).map(|_| ())
    }

    pub fn barcode_prefix_opt(&self) -> Option<&str> {
        (!self.barcode_prefix.is_empty()).then_some(self.barcode_prefix.as_str())
    }

    pub fn barcode_suffix_opt(&self) -> Option<&str> {
        (!self.barcode_suffix.is_empty()).then_some(self.barcode_suffix.as_str())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn control_regex(&self) -> Result<Regex> {
        Regex::new(&self.control_samples)
            .map_err(|e| Error::Config(format!("control_samples: {e}")))
    }

    pub fn qc(&self) -> QcConfig {
        QcConfig {
            min_genes_per_cell: self.min_genes,
            max_pct_mito: self.max_pct_mito,
            min_cells_per_gene: self.min_cells,
            target_sum: self.target_sum,
        }
    }

    pub fn feature_column(&self) -> FeatureColumn {
        match self.feature_column {
            0 => FeatureColumn::Auto,
            k => FeatureColumn::Index(k),
        }
    }

    pub fn condition_params(&self) -> DeParams {
        DeParams {
            lfc_threshold: self.condition_lfc,
            alpha: self.alpha,
            tie_correct: self.tie_correct,
            eps: self.log2fc_eps,
        }
    }

    pub fn pertf_params(&self) -> DeParams {
        DeParams {
            lfc_threshold: self.pertf_lfc,
            ..self.condition_params()
        }
    }

    pub fn ora_params(&self) -> OraParams {
        OraParams {
            min_set: self.ora_min_set,
            max_set: self.ora_max_set,
            q_threshold: self.ora_q,
        }
    }

    pub fn gsea_params(&self) -> GseaParams {
        GseaParams {
            n_perm: self.gsea_n_perm,
            weight: self.gsea_weight,
            seed: self.gsea_seed,
            min_set: self.gsea_min_set,
            max_set: self.gsea_max_set,
        }
    }

    pub fn tfmap_format(&self) -> TfMapFormat {
        TfMapFormat {
            barcode_column: self.tfmap_barcode_column.clone(),
            label_column: self.tfmap_label_column.clone(),
            isoform_delimiter: self.isoform_delimiter,
        }
    }
}
