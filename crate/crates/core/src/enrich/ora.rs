use std::collections::BTreeSet;

use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::io::{Field, GeneSetLibrary, Table};
use crate::stats::bh_adjust;

#[derive(Debug, Clone, PartialEq)]
pub struct OraParams {
    pub min_set: usize,
    pub max_set: usize,
    pub q_threshold: f64,
}

impl Default for OraParams {
    fn default() -> Self {
        Self {
            min_set: 5,
            max_set: 500,
            q_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraRecord {
    pub group: String,
    pub library: String,
    pub term: String,
    /// Query genes in the term.
    pub k: usize,
    /// Term size within the universe.
    pub set_size: usize,
    /// Query size within the universe.
    pub query_size: usize,
    pub universe_size: usize,
    pub p: f64,
    pub q: f64,
    pub overlap: Vec<String>,
}

/// `P(X >= k)` for `X ~ Hypergeometric(N = universe, K = successes, n = draws)`.
pub fn hypergeom_upper_tail(k: usize, successes: usize, draws: usize, universe: usize) -> f64 {
    assert!(successes <= universe && draws <= universe);
    let lo = (draws + successes).saturating_sub(universe);
    let hi = successes.min(draws);
    if k <= lo {
        return 1.0;
    }
    if k > hi {
        return 0.0;
    }
    let (n_pop, n_succ, n_draw) = (universe as u64, successes as u64, draws as u64);
    let denom = ln_binomial(n_pop, n_draw);
    let p: f64 = (k..=hi)
        .map(|i| {
            let i = i as u64;
            (ln_binomial(n_succ, i) + ln_binomial(n_pop - n_succ, n_draw - i) - denom).exp()
        })
        .sum();
    p.min(1.0)
}

/// One-sided hypergeometric test of `query` against every term of `lib`.
///
/// Query and terms are intersected with `universe` first; terms whose
/// intersected size falls outside `[min_set, max_set]` are not tested.
/// Records are sorted by term.
pub fn ora(
    group: &str,
    query: &BTreeSet<String>,
    lib: &GeneSetLibrary,
    universe: &BTreeSet<String>,
    params: &OraParams,
) -> Result<Vec<OraRecord>> {
    if universe.is_empty() {
        return Err(Error::NothingToTest("empty universe".into()));
    }
    let query_in: BTreeSet<&String> = query.iter().filter(|g| universe.contains(*g)).collect();
    let dropped = query.len() - query_in.len();
    if dropped > 0 {
        log::warn!("{group}: {dropped} query gene(s) outside the universe dropped");
    }
    if query_in.is_empty() {
        return Err(Error::NothingToTest(format!("{group}: query empty after universe intersection")));
    }
    let n_universe = universe.len();
    let n_query = query_in.len();
    let mut records = Vec::new();
    for (term, genes) in &lib.sets {
        let set_size = genes.iter().filter(|g| universe.contains(*g)).count();
        if set_size < params.min_set || set_size > params.max_set {
            continue;
        }
        let overlap: Vec<String> = genes
            .iter()
            .filter(|g| query_in.contains(g))
            .cloned()
            .collect();
        records.push(OraRecord {
            group: group.to_string(),
            library: lib.name.clone(),
            term: term.clone(),
            k: overlap.len(),
            set_size,
            query_size: n_query,
            universe_size: n_universe,
            p: hypergeom_upper_tail(overlap.len(), set_size, n_query, n_universe),
            q: f64::NAN,
            overlap,
        });
    }
    let p: Vec<f64> = records.iter().map(|r| r.p).collect();
    for (r, q) in records.iter_mut().zip(bh_adjust(&p)?) {
        r.q = q;
    }
    Ok(records)
}

pub fn ora_table(records: &[OraRecord]) -> Table {
    let mut t = Table::new(&["group", "library", "term", "k", "K", "n", "N", "pval", "qval", "genes"]);
    let mut rows: Vec<&OraRecord> = records.iter().collect();
    rows.sort_by(|a, b| (&a.group, &a.library, &a.term).cmp(&(&b.group, &b.library, &b.term)));
    for r in rows {
        t.push(vec![
            Field::from(&r.group),
            Field::from(&r.library),
            Field::from(&r.term),
            r.k.into(),
            r.set_size.into(),
            r.query_size.into(),
            r.universe_size.into(),
            r.p.into(),
            r.q.into(),
            r.overlap.join(";").into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(genes: &[&str]) -> BTreeSet<String> {
        genes.iter().map(|g| g.to_string()).collect()
    }

    #[test]
    fn tail_example() {
        // (C(5,3)C(5,1) + C(5,4)C(5,0)) / C(10,4) = 55/210
        assert!((hypergeom_upper_tail(3, 5, 4, 10) - 55.0 / 210.0).abs() < 1e-14);
        assert_eq!(hypergeom_upper_tail(7, 7, 7, 7), 1.0);
        assert_eq!(hypergeom_upper_tail(0, 3, 4, 10), 1.0);
        assert_eq!(hypergeom_upper_tail(4, 3, 4, 10), 0.0);
    }

    #[test]
    fn ora_records() {
        let universe: BTreeSet<String> = (0..10).map(|i| format!("g{i}")).collect();
        let mut lib = GeneSetLibrary::new("L");
        lib.sets.insert("T".into(), set(&["g0", "g1", "g2", "g3", "g4"]));
        lib.sets.insert("tiny".into(), set(&["g0"]));
        lib.sets.insert("outside".into(), set(&["x1", "x2", "x3", "x4", "x5", "g9"]));
        let query = set(&["g0", "g1", "g2", "g5", "zz"]);
        let recs = ora("A", &query, &lib, &universe, &OraParams::default()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!((r.k, r.set_size, r.query_size, r.universe_size), (3, 5, 4, 10));
        assert!((r.p - 55.0 / 210.0).abs() < 1e-14);
        assert_eq!(r.q, r.p);
        assert_eq!(r.overlap, vec!["g0", "g1", "g2"]);

        let err = ora("A", &set(&["zz"]), &lib, &universe, &OraParams::default()).unwrap_err();
        assert!(matches!(err, Error::NothingToTest(_)));
    }

    #[test]
    fn disjoint_query_has_p_one() {
        let universe: BTreeSet<String> = (0..20).map(|i| format!("g{i}")).collect();
        let mut lib = GeneSetLibrary::new("L");
        lib.sets.insert("T".into(), (0..5).map(|i| format!("g{i}")).collect());
        let recs = ora("A", &set(&["g10", "g11"]), &lib, &universe, &OraParams::default()).unwrap();
        assert_eq!(recs[0].p, 1.0);
        assert_eq!(recs[0].k, 0);
    }
}
