//! Markdown summary assembled from existing step outputs. Nothing is
//! recomputed here; sections whose step has not run say so.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::io::{read_table, write_bytes, Table};

use super::steps::CONDITION_PREFIX;
use super::{is_complete, PipelineConfig, Step};

fn markdown(t: &Table, limit: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", t.columns().join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(t.columns().len()));
    for row in t.rows().iter().take(limit) {
        let cells: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
        let _ = writeln!(s, "| {} |", cells.join(" | "));
    }
    if t.len() > limit {
        let _ = writeln!(s, "\n({} more rows)", t.len() - limit);
    }
    s
}

fn load(out: &Path, step: Step, file: &str) -> Result<Option<Table>> {
    if !is_complete(out, step)? {
        return Ok(None);
    }
    let path = out.join(step.dir()).join(file);
    if path.is_file() {
        read_table(&path).map(Some)
    } else {
        Ok(None)
    }
}

fn not_run(s: &mut String, step: Step) {
    let _ = writeln!(s, "_Step `{}` has not completed._\n", step.name());
}

fn column<'a>(t: &'a Table, name: &str) -> impl Iterator<Item = &'a str> + 'a {
    let i = t.column(name);
    t.rows().iter().filter_map(move |r| i.map(|i| r[i].as_str()))
}

fn count_nonzero<'a>(values: impl Iterator<Item = &'a str>) -> usize {
    values.filter(|v| v.parse::<f64>().is_ok_and(|x| x > 0.0)).count()
}

fn sorted_by_abs(t: &Table, col: &str) -> Table {
    let mut out = t.clone();
    if let Some(i) = t.column(col) {
        let key = |r: &Vec<String>| r[i].parse::<f64>().map(f64::abs).unwrap_or(0.0);
        out.sort_rows_by(|a, b| key(b).total_cmp(&key(a)));
    }
    out
}

pub(super) fn write_report(cfg: &PipelineConfig, out: &Path, stage: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# TF screen analysis report\n");

    let _ = writeln!(s, "## Quality control\n");
    match load(out, Step::Qc, "qc_summary.csv")? {
        Some(t) => {
            let _ = writeln!(
                s,
                "Cells kept with at least {} genes and at most {}% mitochondrial counts.\n",
                cfg.min_genes, cfg.max_pct_mito
            );
            s.push_str(&markdown(&t, usize::MAX));
            s.push('\n');
        }
        None => not_run(&mut s, Step::Qc),
    }

    let _ = writeln!(s, "## Demultiplexing\n");
    match load(out, Step::Demux, "summary.csv")? {
        Some(t) => {
            s.push_str(&markdown(&t, usize::MAX));
            s.push('\n');
        }
        None => not_run(&mut s, Step::Demux),
    }

    let _ = writeln!(s, "## Condition-level differential expression\n");
    match load(out, Step::DeCondition, "summary.csv")? {
        Some(t) => {
            let _ = writeln!(
                s,
                "Each perturbed sample against pooled control cells; |log2FC| > {}, q < {}.\n",
                cfg.condition_lfc, cfg.alpha
            );
            s.push_str(&markdown(&t, usize::MAX));
            s.push('\n');
        }
        None => not_run(&mut s, Step::DeCondition),
    }

    let _ = writeln!(s, "## Shared background and TF-specific DEGs\n");
    match (load(out, Step::Background, "info.csv")?, load(out, Step::Background, "de_summary.csv")?) {
        (Some(info), Some(summary)) => {
            for row in info.rows() {
                let _ = writeln!(s, "- {}: {}", row[0], row[1]);
            }
            let n = summary.len();
            let specific = count_nonzero(column(&summary, "n_specific_degs"));
            let ovr = count_nonzero(column(&summary, "n_ovr_degs"));
            let _ = writeln!(s, "- TFs tested: {n}");
            let _ = writeln!(s, "- TFs with at least one specific DEG (control reference, background removed): {specific}");
            let _ = writeln!(s, "- TFs with at least one DEG by one-vs-rest: {ovr}\n");
            s.push_str(&markdown(&summary, usize::MAX));
            s.push('\n');
        }
        _ => not_run(&mut s, Step::Background),
    }

    let _ = writeln!(s, "## Over-representation analysis\n");
    match (load(out, Step::Enrich, "enrichment.csv")?, load(out, Step::Enrich, "recurrence.csv")?) {
        (Some(ora), Some(rec)) => {
            let (gi, qi) = (ora.column("group"), ora.column("qval"));
            let mut tf_terms = 0;
            let mut tfs = std::collections::BTreeSet::new();
            if let (Some(gi), Some(qi)) = (gi, qi) {
                for r in ora.rows() {
                    let sig = r[qi].parse::<f64>().is_ok_and(|q| q < cfg.ora_q);
                    if sig && !r[gi].starts_with(CONDITION_PREFIX) {
                        tf_terms += 1;
                        tfs.insert(r[gi].clone());
                    }
                }
            }
            let _ = writeln!(
                s,
                "{tf_terms} significant TF-level term hits (q < {}) across {} TFs. Most recurrent terms:\n",
                cfg.ora_q,
                tfs.len()
            );
            s.push_str(&markdown(&rec, 15));
            s.push('\n');
        }
        _ => not_run(&mut s, Step::Enrich),
    }

    let _ = writeln!(s, "## Preranked GSEA (condition level)\n");
    match load(out, Step::Gsea, "gsea.csv")? {
        Some(t) => {
            let _ = writeln!(s, "Top terms by |NES|:\n");
            s.push_str(&markdown(&sorted_by_abs(&t, "nes"), 15));
            s.push('\n');
        }
        None => not_run(&mut s, Step::Gsea),
    }

    let _ = writeln!(s, "## Agreement with published rankings\n");
    match load(out, Step::Validate, "validation.csv")? {
        Some(t) => {
            let _ = writeln!(
                s,
                "Spearman correlation of specific-DEG counts with published ranks. Rank 1 is the strongest TF, so agreement gives a negative rho.\n"
            );
            s.push_str(&markdown(&t, usize::MAX));
            s.push('\n');
        }
        None => not_run(&mut s, Step::Validate),
    }

    write_bytes(&stage.join("report.md"), s.as_bytes())
}
