//! Genes significant in most groups are treated as a shared artifact and
//! removed from every group's DEG list.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::io::{Field, Table};

use super::DETable;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    pub genes: BTreeSet<String>,
    /// Number of groups each background gene was significant in.
    pub counts: BTreeMap<String, usize>,
    pub n_groups: usize,
    pub threshold_groups: usize,
    pub fraction: f64,
}

impl BackgroundSet {
    pub fn empty() -> Self {
        Self {
            genes: BTreeSet::new(),
            counts: BTreeMap::new(),
            n_groups: 0,
            threshold_groups: 0,
            fraction: 1.0,
        }
    }

    pub fn contains(&self, gene: &str) -> bool {
        self.genes.contains(gene)
    }
}

/// `ceil(fraction * n_groups)`, with products that land within rounding
/// error of an integer (`0.7 * 10 = 7.000000000000001`) taken as that integer.
pub fn background_threshold(fraction: f64, n_groups: usize) -> usize {
    let x = fraction * n_groups as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

pub fn identify_background(
    per_group_significant: &BTreeMap<String, BTreeSet<String>>,
    fraction: f64,
) -> Result<BackgroundSet> {
    if per_group_significant.is_empty() {
        return Err(Error::InvalidArgument("background needs at least one group".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "background fraction {fraction} outside (0, 1]"
        )));
    }
    let n_groups = per_group_significant.len();
    let threshold = background_threshold(fraction, n_groups).max(1);
    let mut hits: BTreeMap<&str, usize> = BTreeMap::new();
    for genes in per_group_significant.values() {
        for g in genes {
            *hits.entry(g).or_default() += 1;
        }
    }
    let counts: BTreeMap<String, usize> = hits
        .into_iter()
        .filter(|&(_, n)| n >= threshold)
        .map(|(g, n)| (g.to_string(), n))
        .collect();
    Ok(BackgroundSet {
        genes: counts.keys().cloned().collect(),
        counts,
        n_groups,
        threshold_groups: threshold,
        fraction,
    })
}

/// Marks background genes and clears their significance; statistics are kept.
pub fn subtract_background(t: &DETable, bg: &BackgroundSet) -> DETable {
    let mut out = t.clone();
    for r in &mut out.records {
        if bg.contains(&r.gene) {
            r.in_background = true;
            r.significant = false;
        }
    }
    out
}

pub fn background_table(bg: &BackgroundSet) -> Table {
    let mut t = Table::new(&["gene", "n_groups_significant"]);
    for (g, n) in &bg.counts {
        t.push(vec![Field::from(g), (*n).into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::de::{DERecord, DeParams};

    #[test]
    fn thresholds() {
        assert_eq!(background_threshold(0.70, 61), 43);
        assert_eq!(background_threshold(0.70, 3), 3);
        assert_eq!(background_threshold(0.70, 10), 7);
        assert_eq!(background_threshold(0.70, 20), 14);
        assert_eq!(background_threshold(1.0, 5), 5);
    }

    fn sets(expected: &[(&str, usize)], n_groups: usize) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> =
            (0..n_groups).map(|i| (format!("tf{i:02}"), BTreeSet::new())).collect();
        for &(gene, n) in expected {
            for set in out.values_mut().take(n) {
                set.insert(gene.to_string());
            }
        }
        out
    }

    #[test]
    fn boundary_at_43_of_61() {
        let bg = identify_background(&sets(&[("in", 43), ("out", 42)], 61), 0.70).unwrap();
        assert_eq!(bg.threshold_groups, 43);
        assert!(bg.contains("in"));
        assert!(!bg.contains("out"));
        assert_eq!(bg.counts["in"], 43);
    }

    #[test]
    fn errors() {
        assert!(identify_background(&BTreeMap::new(), 0.7).is_err());
        assert!(identify_background(&sets(&[], 2), 0.0).is_err());
    }

    fn table(genes: &[(&str, bool)]) -> DETable {
        DETable {
            group: "A".into(),
            reference: "EB".into(),
            params: DeParams::per_tf(),
            records: genes
                .iter()
                .map(|&(g, s)| DERecord {
                    gene: g.into(),
                    group: "A".into(),
                    log2fc: 1.0,
                    z: 3.0,
                    p: 0.001,
                    q: 0.01,
                    significant: s,
                    in_background: false,
                })
                .collect(),
        }
    }

    #[test]
    fn subtraction() {
        let t = table(&[("a", true), ("b", true), ("c", false)]);
        assert_eq!(subtract_background(&t, &BackgroundSet::empty()), t);

        let all = identify_background(&sets(&[("a", 1), ("b", 1)], 1), 1.0).unwrap();
        let s = subtract_background(&t, &all);
        assert_eq!(s.n_significant(), 0);
        assert!(s.records[0].in_background && s.records[1].in_background);
        assert!(!s.records[2].in_background);
        assert_eq!(s.records[0].q, t.records[0].q);
    }
}
