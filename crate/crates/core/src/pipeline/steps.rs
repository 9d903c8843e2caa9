use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::de::{
    identify_background, background_table, significant_sets, subtract_background, summarize, summary_table,
    DETable, DeEngine, DeParams,
};
use crate::demux::{assign_identities, demux_summary, tf_cell_counts, tf_counts_table, BarcodeExtractor, DemuxStatus};
use crate::enrich::{gsea_preranked, gsea_table, ora, ora_table, recurrence, OraRecord};
use crate::error::{Error, Result};
use crate::io::{
    read_gmt, read_mtx, read_mtx_with, read_rank_table, read_table, read_tfmap, write_mtx, write_table, Field,
    GeneSetLibrary, Table,
};
use crate::matrix::{merge_samples, mito_genes_by_prefix, per_cell_stats, CountMatrix, ExprMatrix};
use crate::qc::{filter_cells, filter_genes, normalize_log1p};
use crate::validate::compare_to_published;

use super::{report, PipelineConfig, Step};

/// Prefix of condition-level groups in the enrichment table.
pub const CONDITION_PREFIX: &str = "condition:";

/// The configuration key a step needs but does not have, if any.
pub(super) fn disabled_by(cfg: &PipelineConfig, step: Step) -> Option<&'static str> {
    match step {
        Step::Enrich | Step::Gsea if cfg.gmt.is_empty() => Some("gmt"),
        Step::Validate if cfg.rank_table.is_none() => Some("rank_table"),
        _ => None,
    }
}

/// Parameters that influence a step's outputs; part of its input digest.
pub(super) fn params(cfg: &PipelineConfig, step: Step) -> Value {
    match step {
        Step::Qc => json!({
            "min_genes": cfg.min_genes,
            "max_pct_mito": cfg.max_pct_mito,
            "mito_prefix": cfg.mito_prefix,
            "feature_column": cfg.feature_column,
            "samples": sample_names(cfg).unwrap_or_default(),
        }),
        Step::Merge => json!({ "min_cells": cfg.min_cells, "samples": sample_names(cfg).unwrap_or_default() }),
        Step::Demux => json!({
            "barcode_column": cfg.tfmap_barcode_column,
            "label_column": cfg.tfmap_label_column,
            "isoform_delimiter": cfg.isoform_delimiter.to_string(),
            "barcode_prefix": cfg.barcode_prefix,
            "barcode_suffix": cfg.barcode_suffix,
            "min_cells_per_tf": cfg.min_cells_per_tf,
        }),
        Step::DeCondition => json!({
            "control_samples": cfg.control_samples,
            "target_sum": cfg.target_sum,
            "de": de_params_json(&cfg.condition_params()),
        }),
        Step::DePertf => json!({
            "control_samples": cfg.control_samples,
            "target_sum": cfg.target_sum,
            "min_cells_per_tf": cfg.min_cells_per_tf,
            "de": de_params_json(&cfg.pertf_params()),
        }),
        Step::Background => json!({
            "background_fraction": cfg.background_fraction,
            "top_genes": cfg.top_genes,
        }),
        Step::Enrich => json!({
            "min_degs_for_ora": cfg.min_degs_for_ora,
            "ora_min_set": cfg.ora_min_set,
            "ora_max_set": cfg.ora_max_set,
            "ora_q": cfg.ora_q,
        }),
        Step::Gsea => json!({
            "n_perm": cfg.gsea_n_perm,
            "seed": cfg.gsea_seed,
            "weight": cfg.gsea_weight,
            "min_set": cfg.gsea_min_set,
            "max_set": cfg.gsea_max_set,
        }),
        Step::Validate => json!({ "uppercase_tf_symbols": cfg.uppercase_tf_symbols }),
        Step::Report => json!({ "alpha": cfg.alpha, "ora_q": cfg.ora_q }),
    }
}

fn de_params_json(p: &DeParams) -> Value {
    json!({
        "lfc_threshold": p.lfc_threshold,
        "alpha": p.alpha,
        "tie_correct": p.tie_correct,
        "eps": p.eps,
    })
}

fn missing(step: Step, path: PathBuf) -> Error {
    Error::MissingInput {
        step: step.name().into(),
        path,
    }
}

fn existing(step: Step, path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(missing(step, path))
    }
}

fn first_existing(step: Step, dir: &Path, names: &[&str]) -> Result<PathBuf> {
    names
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
        .ok_or_else(|| missing(step, dir.join(names[0])))
}

struct SampleFiles {
    name: String,
    matrix: PathBuf,
    barcodes: PathBuf,
    features: PathBuf,
}

fn sample_names(cfg: &PipelineConfig) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for dir in &cfg.sample_dirs {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Config(format!("sample_dirs: `{}` has no directory name", dir.display())))?;
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateSample(name));
        }
        out.push(name);
    }
    Ok(out)
}

fn sample_files(cfg: &PipelineConfig) -> Result<Vec<SampleFiles>> {
    if cfg.sample_dirs.is_empty() {
        return Err(Error::Config("sample_dirs: no samples configured".into()));
    }
    let names = sample_names(cfg)?;
    cfg.sample_dirs
        .iter()
        .zip(names)
        .map(|(dir, name)| {
            let dir = cfg.resolve(dir);
            if !dir.is_dir() {
                return Err(missing(Step::Qc, dir));
            }
            Ok(SampleFiles {
                name,
                matrix: first_existing(Step::Qc, &dir, &["matrix.mtx", "matrix.mtx.gz"])?,
                barcodes: first_existing(Step::Qc, &dir, &["barcodes.tsv", "barcodes.tsv.gz"])?,
                features: first_existing(
                    Step::Qc,
                    &dir,
                    &["features.tsv", "features.tsv.gz", "genes.tsv", "genes.tsv.gz"],
                )?,
            })
        })
        .collect()
}

/// Raw (non-pipeline) files a step reads, with stable logical labels.
pub(super) fn raw_inputs(cfg: &PipelineConfig, step: Step) -> Result<Vec<(String, PathBuf)>> {
    let label = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(match step {
        Step::Qc => sample_files(cfg)?
            .into_iter()
            .flat_map(|s| {
                [s.matrix, s.barcodes, s.features]
                    .into_iter()
                    .map(move |p| (format!("{}/{}", s.name, label(&p)), p))
            })
            .collect(),
        Step::Demux => {
            let path = cfg.tfmap.as_ref().ok_or_else(|| missing(step, PathBuf::from("<tfmap>")))?;
            vec![("tfmap".into(), existing(step, cfg.resolve(path))?)]
        }
        Step::Enrich | Step::Gsea => cfg
            .gmt
            .iter()
            .enumerate()
            .map(|(i, p)| Ok((format!("gmt{i}"), existing(step, cfg.resolve(p))?)))
            .collect::<Result<_>>()?,
        Step::Validate => match &cfg.rank_table {
            Some(p) => vec![("rank_table".into(), existing(step, cfg.resolve(p))?)],
            None => Vec::new(),
        },
        _ => Vec::new(),
    })
}

/// File-name-safe, collision-free stems for group names, in input order.
fn file_stems<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut used = HashSet::new();
    names
        .into_iter()
        .map(|n| {
            let base: String = n
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
                .collect();
            let mut stem = base.clone();
            let mut k = 2;
            while !used.insert(stem.to_lowercase()) {
                stem = format!("{base}_{k}");
                k += 1;
            }
            stem
        })
        .collect()
}

pub(super) fn execute(cfg: &PipelineConfig, out: &Path, step: Step, stage: &Path) -> Result<()> {
    match step {
        Step::Qc => qc(cfg, stage),
        Step::Merge => merge(cfg, out, stage),
        Step::Demux => demux(cfg, out, stage),
        Step::DeCondition => de_condition(cfg, out, stage),
        Step::DePertf => de_pertf(cfg, out, stage),
        Step::Background => background(cfg, out, stage),
        Step::Enrich => enrich(cfg, out, stage),
        Step::Gsea => gsea(cfg, out, stage),
        Step::Validate => validate(cfg, out, stage),
        Step::Report => report::write_report(cfg, out, stage),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn qc(cfg: &PipelineConfig, stage: &Path) -> Result<()> {
    let qc_cfg = cfg.qc();
    let mut summary = Table::new(&[
        "sample",
        "n_cells_raw",
        "n_cells_kept",
        "n_genes",
        "n_mito_genes",
        "median_genes_kept",
        "median_counts_kept",
    ]);
    for s in sample_files(cfg)? {
        let m = read_mtx_with(&s.matrix, &s.barcodes, &s.features, cfg.feature_column())?;
        let mito = mito_genes_by_prefix(m.gene_ids(), &cfg.mito_prefix);
        if mito.is_empty() {
            log::info!("sample {}: no genes with prefix `{}`; mito fraction is 0", s.name, cfg.mito_prefix);
        }
        let stats = per_cell_stats(&m, &mito);
        let kept = filter_cells(&m, &stats, &qc_cfg);
        let kept_stats = per_cell_stats(&kept, &mito);
        summary.push(vec![
            Field::from(&s.name),
            m.n_cells().into(),
            kept.n_cells().into(),
            m.n_genes().into(),
            mito.len().into(),
            median(kept_stats.genes_detected.iter().map(|&g| g as f64).collect()).into(),
            median(kept_stats.total_counts.iter().map(|&c| c as f64).collect()).into(),
        ]);
        log::debug!("sample {}: kept {} of {} cells", s.name, kept.n_cells(), m.n_cells());
        write_mtx(&stage.join("samples").join(&s.name), &kept)?;
    }
    write_table(&summary, &stage.join("qc_summary.csv"))
}

fn read_matrix_dir(dir: &Path) -> Result<CountMatrix> {
    read_mtx(&dir.join("matrix.mtx"), &dir.join("barcodes.tsv"), &dir.join("features.tsv"))
}

fn merge(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let qc_dir = out.join(Step::Qc.dir()).join("samples");
    let samples = sample_names(cfg)?
        .into_iter()
        .map(|name| Ok((name.clone(), read_matrix_dir(&qc_dir.join(&name))?)))
        .collect::<Result<Vec<_>>>()?;
    let (merged, ann) = merge_samples(samples)?;
    let filtered = filter_genes(&merged, &cfg.qc());
    log::debug!("merged {} cells; kept {} of {} genes", filtered.n_cells(), filtered.n_genes(), merged.n_genes());
    write_mtx(stage, &filtered)?;
    let mut cells = Table::new(&["cell", "sample"]);
    for (c, s) in filtered.cell_ids().iter().zip(&ann.sample) {
        cells.push(vec![c.into(), s.into()]);
    }
    write_table(&cells, &stage.join("cells.csv"))
}

/// Merged counts with the sample of each cell.
fn load_merged(out: &Path) -> Result<(CountMatrix, Vec<String>)> {
    let dir = out.join(Step::Merge.dir());
    let m = read_matrix_dir(&dir)?;
    let path = dir.join("cells.csv");
    let t = read_table(&path)?;
    let (ci, si) = (t.require("cell", &path)?, t.require("sample", &path)?);
    let mut samples = Vec::with_capacity(t.len());
    for (row, id) in t.rows().iter().zip(m.cell_ids()) {
        if &row[ci] != id {
            return Err(Error::InvalidArgument(format!("{}: cell order differs from the matrix", path.display())));
        }
        samples.push(row[si].clone());
    }
    if samples.len() != m.n_cells() {
        return Err(Error::LabelLengthMismatch {
            labels: samples.len(),
            cells: m.n_cells(),
        });
    }
    Ok((m, samples))
}

fn demux(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let (m, samples) = load_merged(out)?;
    let path = cfg.resolve(cfg.tfmap.as_ref().expect("checked in raw_inputs"));
    let map = read_tfmap(&path, &cfg.tfmap_format())?;
    let extractor = BarcodeExtractor::new(cfg.barcode_prefix_opt(), cfg.barcode_suffix_opt())?;
    let r = assign_identities(m.cell_ids(), &map, &extractor)?;

    let mut t = Table::new(&["cell", "sample", "status", "tf"]);
    for i in 0..r.len() {
        t.push(vec![
            Field::from(&r.cells[i]),
            Field::from(&samples[i]),
            r.status[i].as_str().into(),
            r.tf[i].clone().into(),
        ]);
    }
    write_table(&t, &stage.join("assignments.csv"))?;
    write_table(&demux_summary(&r, &samples)?.to_table(), &stage.join("summary.csv"))?;
    write_table(&tf_counts_table(&tf_cell_counts(&r, cfg.min_cells_per_tf)), &stage.join("tf_counts.csv"))
}

fn normalized(cfg: &PipelineConfig, m: &CountMatrix) -> Result<ExprMatrix> {
    normalize_log1p(m, &cfg.qc())
}

fn control_cells(cfg: &PipelineConfig, samples: &[String]) -> Result<Vec<usize>> {
    let re = cfg.control_regex()?;
    let cells: Vec<usize> = (0..samples.len()).filter(|&i| re.is_match(&samples[i])).collect();
    if cells.is_empty() {
        return Err(Error::EmptyGroup(format!("control samples matching `{}`", cfg.control_samples)));
    }
    Ok(cells)
}

fn de_condition(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let (m, samples) = load_merged(out)?;
    let e = normalized(cfg, &m)?;
    let engine = DeEngine::new(&e);
    let controls = control_cells(cfg, &samples)?;
    let re = cfg.control_regex()?;
    let conditions: Vec<String> = sample_names(cfg)?.into_iter().filter(|s| !re.is_match(s)).collect();
    let stems = file_stems(conditions.iter().map(String::as_str));
    let params = cfg.condition_params();
    let mut summary = Table::new(&["condition", "file", "n_cells", "n_reference", "n_significant", "n_up", "n_down"]);
    for (cond, stem) in conditions.iter().zip(&stems) {
        let group: Vec<usize> = (0..samples.len()).filter(|&i| &samples[i] == cond).collect();
        if group.is_empty() {
            log::warn!("condition {cond}: no cells passed QC; skipped");
            continue;
        }
        let t = engine.compare(cond, &group, "control", &controls, &params)?;
        let file = format!("{stem}.csv");
        write_table(&t.to_table(), &stage.join(&file))?;
        let up = t.records.iter().filter(|r| r.significant && r.log2fc > 0.0).count();
        summary.push(vec![
            cond.into(),
            file.into(),
            group.len().into(),
            controls.len().into(),
            t.n_significant().into(),
            up.into(),
            (t.n_significant() - up).into(),
        ]);
    }
    write_table(&summary, &stage.join("summary.csv"))
}

/// Assigned, non-control cells grouped by TF.
fn tf_groups(cfg: &PipelineConfig, out: &Path, m: &CountMatrix, samples: &[String]) -> Result<BTreeMap<String, Vec<usize>>> {
    let path = out.join(Step::Demux.dir()).join("assignments.csv");
    let t = read_table(&path)?;
    let (ci, si, ti) = (t.require("cell", &path)?, t.require("status", &path)?, t.require("tf", &path)?);
    let index = m.cell_index();
    let re = cfg.control_regex()?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut in_control = 0;
    for row in t.rows() {
        let status: DemuxStatus = row[si].parse()?;
        if status != DemuxStatus::Assigned {
            continue;
        }
        let &c = index.get(row[ci].as_str()).ok_or_else(|| Error::UnknownCell(row[ci].clone()))?;
        if re.is_match(&samples[c]) {
            in_control += 1;
            continue;
        }
        groups.entry(row[ti].clone()).or_default().push(c);
    }
    if in_control > 0 {
        log::warn!("{in_control} control-sample cell(s) carry a TF assignment; left out of TF groups");
    }
    Ok(groups)
}

fn de_pertf(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let (m, samples) = load_merged(out)?;
    let groups = tf_groups(cfg, out, &m, &samples)?;
    let e = normalized(cfg, &m)?;
    let engine = DeEngine::new(&e);
    let controls = control_cells(cfg, &samples)?;
    let assigned: Vec<usize> = {
        let mut v: Vec<usize> = groups.values().flatten().copied().collect();
        v.sort_unstable();
        v
    };
    let params = cfg.pertf_params();
    let stems = file_stems(groups.keys().map(String::as_str));
    let mut index = Table::new(&["tf", "n_cells", "eligible", "file"]);
    for ((tf, cells), stem) in groups.iter().zip(&stems) {
        let eligible = cells.len() >= cfg.min_cells_per_tf;
        let file = format!("{stem}.csv");
        if eligible {
            let vs_control = engine.compare(tf, cells, "control", &controls, &params)?;
            let members: HashSet<usize> = cells.iter().copied().collect();
            let rest: Vec<usize> = assigned.iter().copied().filter(|c| !members.contains(c)).collect();
            write_table(&vs_control.to_table(), &stage.join("vs_control").join(&file))?;
            if rest.is_empty() {
                log::warn!("{tf}: no other assigned cells; one-vs-rest skipped");
            } else {
                let vs_rest = engine.compare(tf, cells, "rest", &rest, &params)?;
                write_table(&vs_rest.to_table(), &stage.join("vs_rest").join(&file))?;
            }
        }
        index.push(vec![
            tf.into(),
            cells.len().into(),
            eligible.into(),
            if eligible { Field::from(file) } else { Field::Empty },
        ]);
    }
    write_table(&index, &stage.join("groups.csv"))
}

struct GroupEntry {
    tf: String,
    n_cells: usize,
    file: String,
}

fn eligible_groups(out: &Path) -> Result<Vec<GroupEntry>> {
    let path = out.join(Step::DePertf.dir()).join("groups.csv");
    let t = read_table(&path)?;
    let (ti, ni, ei, fi) = (
        t.require("tf", &path)?,
        t.require("n_cells", &path)?,
        t.require("eligible", &path)?,
        t.require("file", &path)?,
    );
    let mut out = Vec::new();
    for (i, row) in t.rows().iter().enumerate() {
        if row[ei] != "true" {
            continue;
        }
        out.push(GroupEntry {
            tf: row[ti].clone(),
            n_cells: row[ni]
                .parse()
                .map_err(|_| Error::parse(&path, i + 2, format!("bad cell count `{}`", row[ni])))?,
            file: row[fi].clone(),
        });
    }
    Ok(out)
}

fn read_de(path: &Path, group: &str, reference: &str, params: DeParams) -> Result<DETable> {
    DETable::from_table(&read_table(path)?, group, reference, params, path)
}

fn background(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let dir = out.join(Step::DePertf.dir());
    let params = cfg.pertf_params();
    let groups = eligible_groups(out)?;
    let mut vs_control = Vec::with_capacity(groups.len());
    for g in &groups {
        vs_control.push(read_de(&dir.join("vs_control").join(&g.file), &g.tf, "control", params)?);
    }
    let bg = identify_background(&significant_sets(&vs_control), cfg.background_fraction)?;
    write_table(&background_table(&bg), &stage.join("background.csv"))?;
    let mut info = Table::new(&["key", "value"]);
    info.push(vec!["fraction".into(), bg.fraction.into()]);
    info.push(vec!["n_groups".into(), bg.n_groups.into()]);
    info.push(vec!["threshold_groups".into(), bg.threshold_groups.into()]);
    info.push(vec!["n_background_genes".into(), bg.genes.len().into()]);
    write_table(&info, &stage.join("info.csv"))?;

    let mut rows = Vec::with_capacity(groups.len());
    for (g, t) in groups.iter().zip(&vs_control) {
        let specific = subtract_background(t, &bg);
        write_table(&specific.to_table(), &stage.join("specific").join(&g.file))?;
        let rest_path = dir.join("vs_rest").join(&g.file);
        let vs_rest = if rest_path.is_file() {
            Some(read_de(&rest_path, &g.tf, "rest", params)?)
        } else {
            None
        };
        rows.push(summarize(&g.tf, g.n_cells, &specific, vs_rest.as_ref(), cfg.top_genes));
    }
    write_table(&summary_table(&rows), &stage.join("de_summary.csv"))
}

fn libraries(cfg: &PipelineConfig) -> Result<Vec<GeneSetLibrary>> {
    let mut names = HashSet::new();
    let mut libs = Vec::new();
    for p in &cfg.gmt {
        let lib = read_gmt(&cfg.resolve(p))?;
        if !names.insert(lib.name.clone()) {
            return Err(Error::DuplicateId {
                kind: "gene-set library",
                id: lib.name,
            });
        }
        libs.push(lib);
    }
    Ok(libs)
}

struct Condition {
    name: String,
    file: String,
}

fn conditions(out: &Path) -> Result<Vec<Condition>> {
    let path = out.join(Step::DeCondition.dir()).join("summary.csv");
    let t = read_table(&path)?;
    let (ci, fi) = (t.require("condition", &path)?, t.require("file", &path)?);
    Ok(t.rows()
        .iter()
        .map(|r| Condition {
            name: r[ci].clone(),
            file: r[fi].clone(),
        })
        .collect())
}

fn enrich(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let libs = libraries(cfg)?;
    let params = cfg.ora_params();
    let mut queries: Vec<(String, BTreeSet<String>, bool)> = Vec::new();
    let mut universe: BTreeSet<String> = BTreeSet::new();

    let specific_dir = out.join(Step::Background.dir()).join("specific");
    for g in eligible_groups(out)? {
        let t = read_de(&specific_dir.join(&g.file), &g.tf, "control", cfg.pertf_params())?;
        universe.extend(t.records.iter().map(|r| r.gene.clone()));
        queries.push((g.tf.clone(), t.significant_genes(), true));
    }
    let cond_dir = out.join(Step::DeCondition.dir());
    for c in conditions(out)? {
        let t = read_de(&cond_dir.join(&c.file), &c.name, "control", cfg.condition_params())?;
        universe.extend(t.records.iter().map(|r| r.gene.clone()));
        queries.push((format!("{CONDITION_PREFIX}{}", c.name), t.significant_genes(), false));
    }

    let mut all: Vec<OraRecord> = Vec::new();
    let mut per_tf: BTreeMap<String, Vec<OraRecord>> = BTreeMap::new();
    for (group, query, is_tf) in &queries {
        if query.len() < cfg.min_degs_for_ora.max(1) {
            log::debug!("{group}: {} DEGs, below the ORA minimum", query.len());
            continue;
        }
        for lib in &libs {
            let recs = ora(group, query, lib, &universe, &params)?;
            if *is_tf {
                per_tf.entry(group.clone()).or_default().extend(recs.iter().cloned());
            }
            all.extend(recs);
        }
    }
    write_table(&ora_table(&all), &stage.join("enrichment.csv"))?;
    write_table(&recurrence(&per_tf, cfg.ora_q).to_table(), &stage.join("recurrence.csv"))
}

fn gsea(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let libs = libraries(cfg)?;
    let params = cfg.gsea_params();
    let dir = out.join(Step::DeCondition.dir());
    let mut all = Vec::new();
    for c in conditions(out)? {
        let t = read_de(&dir.join(&c.file), &c.name, "control", cfg.condition_params())?;
        let mut ranking: Vec<(String, f64)> = t.records.iter().map(|r| (r.gene.clone(), r.z)).collect();
        ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        for lib in &libs {
            all.extend(gsea_preranked(&c.name, &ranking, lib, &params)?);
        }
    }
    write_table(&gsea_table(&all), &stage.join("gsea.csv"))
}

fn validate(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let path = out.join(Step::Background.dir()).join("de_summary.csv");
    let t = read_table(&path)?;
    let (ti, ni) = (t.require("tf", &path)?, t.require("n_specific_degs", &path)?);
    let mut counts = BTreeMap::new();
    for (i, row) in t.rows().iter().enumerate() {
        let n: usize = row[ni]
            .parse()
            .map_err(|_| Error::parse(&path, i + 2, format!("bad DEG count `{}`", row[ni])))?;
        counts.insert(row[ti].clone(), n);
    }
    let ranks = read_rank_table(&cfg.resolve(cfg.rank_table.as_ref().expect("checked by disabled_by")))?;
    let report = compare_to_published(&counts, &ranks, cfg.uppercase_tf_symbols);
    write_table(&report.summary_table(), &stage.join("validation.csv"))?;
    write_table(&report.matched_table(), &stage.join("matched_rows.csv"))
}
