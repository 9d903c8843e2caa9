//! Preranked GSEA with gene-set permutation nulls.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{Field, GeneSetLibrary, Table};
use crate::stats::bh_adjust;

#[derive(Debug, Clone, PartialEq)]
pub struct GseaParams {
    pub n_perm: usize,
    pub weight: f64,
    pub seed: u64,
    pub min_set: usize,
    pub max_set: usize,
}

impl Default for GseaParams {
    fn default() -> Self {
        Self {
            n_perm: 1000,
            weight: 1.0,
            seed: 42,
            min_set: 5,
            max_set: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GseaRecord {
    pub group: String,
    pub library: String,
    pub term: String,
    pub n_hits: usize,
    pub es: f64,
    pub nes: f64,
    pub p: f64,
    pub q: f64,
    pub leading_edge: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrichmentScore {
    pub es: f64,
    /// Ranking position (0-based) where the running sum reaches `es`.
    pub peak: usize,
}

fn hit_weights(scores: &[f64], hits: &[usize], weight: f64) -> Vec<f64> {
    let w: Vec<f64> = hits.iter().map(|&i| scores[i].abs().powf(weight)).collect();
    if w.iter().sum::<f64>() > 0.0 {
        w
    } else {
        // all hit scores are zero: fall back to equal weights
        vec![1.0; hits.len()]
    }
}

/// Full running-sum curve, one value per ranking position.
pub fn running_sum(scores: &[f64], hits: &[usize], weight: f64) -> Vec<f64> {
    let n = scores.len();
    let w = hit_weights(scores, hits, weight);
    let total: f64 = w.iter().sum();
    let n_miss = (n - hits.len()) as f64;
    let mut is_hit = vec![None; n];
    for (k, &i) in hits.iter().enumerate() {
        is_hit[i] = Some(k);
    }
    let mut cum_hit = 0.0;
    let mut misses = 0usize;
    is_hit
        .iter()
        .map(|h| {
            match h {
                Some(k) => cum_hit += w[*k],
                None => misses += 1,
            }
            cum_hit / total - misses as f64 / n_miss
        })
        .collect()
}

/// Signed maximum deviation of the running sum. `hits` must be sorted
/// ascending, non-empty, and smaller than the ranking. Only positions next
/// to hits can be extremal, so the cost is linear in the number of hits.
pub fn enrichment_score(scores: &[f64], hits: &[usize], weight: f64) -> EnrichmentScore {
    let n = scores.len();
    debug_assert!(!hits.is_empty() && hits.len() < n);
    let w = hit_weights(scores, hits, weight);
    let total: f64 = w.iter().sum();
    let n_miss = (n - hits.len()) as f64;

    let mut best_pos = (f64::NEG_INFINITY, 0usize);
    let mut best_neg = (f64::INFINITY, 0usize);
    let mut cum = 0.0;
    for (j, &pos) in hits.iter().enumerate() {
        let misses = (pos - j) as f64;
        if pos > 0 {
            let before = cum / total - misses / n_miss;
            if before < best_neg.0 {
                best_neg = (before, pos - 1);
            }
        }
        cum += w[j];
        let after = cum / total - misses / n_miss;
        if after > best_pos.0 {
            best_pos = (after, pos);
        }
    }
    let last = *hits.last().unwrap();
    if last + 1 < n {
        let end = cum / total - (n - hits.len()) as f64 / n_miss;
        if end < best_neg.0 {
            best_neg = (end, n - 1);
        }
    }
    if best_pos.0 >= -best_neg.0 {
        EnrichmentScore { es: best_pos.0, peak: best_pos.1 }
    } else {
        EnrichmentScore { es: best_neg.0, peak: best_neg.1 }
    }
}

/// Per-term RNG seed derived from the run seed, library and term name, so
/// permutation streams do not depend on scheduling.
pub fn term_seed(seed: u64, library: &str, term: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(library.as_bytes());
    h.update([0u8]);
    h.update(term.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn null_distribution(scores: &[f64], n_hits: usize, params: &GseaParams, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..params.n_perm)
        .map(|_| {
            let mut hits = rand::seq::index::sample(&mut rng, scores.len(), n_hits).into_vec();
            hits.sort_unstable();
            enrichment_score(scores, &hits, params.weight).es
        })
        .collect()
}

/// `ranking` holds `(gene, score)` sorted by score descending. Records come
/// back in term order with BH q-values across the tested terms.
pub fn gsea_preranked(
    group: &str,
    ranking: &[(String, f64)],
    lib: &GeneSetLibrary,
    params: &GseaParams,
) -> Result<Vec<GseaRecord>> {
    if params.n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be at least 1".into()));
    }
    let mut position = HashMap::with_capacity(ranking.len());
    for (i, (gene, score)) in ranking.iter().enumerate() {
        if !score.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite score for `{gene}`")));
        }
        if i > 0 && ranking[i - 1].1 < *score {
            return Err(Error::InvalidArgument("ranking is not sorted descending".into()));
        }
        if position.insert(gene.as_str(), i).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate gene `{gene}` in ranking")));
        }
    }
    let scores: Vec<f64> = ranking.iter().map(|(_, s)| *s).collect();

    let mut tests = Vec::new();
    for (term, genes) in &lib.sets {
        let mut hits: Vec<usize> = genes.iter().filter_map(|g| position.get(g.as_str()).copied()).collect();
        if hits.is_empty() {
            log::warn!("{group}: term `{term}` shares no genes with the ranking; skipped");
            continue;
        }
        if hits.len() == ranking.len() {
            return Err(Error::InvalidArgument(format!(
                "term `{term}` covers the whole ranking; no misses to score"
            )));
        }
        if hits.len() < params.min_set || hits.len() > params.max_set {
            continue;
        }
        hits.sort_unstable();
        tests.push((term, hits));
    }

    let mut records: Vec<GseaRecord> = tests
        .par_iter()
        .map(|(term, hits)| {
            let obs = enrichment_score(&scores, hits, params.weight);
            let nulls = null_distribution(&scores, hits.len(), params, term_seed(params.seed, &lib.name, term));
            let positive = obs.es >= 0.0;
            let same_sign: Vec<f64> = nulls
                .iter()
                .copied()
                .filter(|&e| (e >= 0.0) == positive)
                .map(f64::abs)
                .collect();
            let extreme = same_sign.iter().filter(|&&e| e >= obs.es.abs()).count();
            let p = (1 + extreme) as f64 / (1 + same_sign.len()) as f64;
            let mean = if same_sign.is_empty() {
                obs.es.abs()
            } else {
                same_sign.iter().sum::<f64>() / same_sign.len() as f64
            };
            let nes = if mean > 0.0 { obs.es / mean } else { 0.0 };
            let leading_edge = hits
                .iter()
                .filter(|&&h| if positive { h <= obs.peak } else { h > obs.peak })
                .map(|&h| ranking[h].0.clone())
                .collect();
            GseaRecord {
                group: group.to_string(),
                library: lib.name.clone(),
                term: (*term).clone(),
                n_hits: hits.len(),
                es: obs.es,
                nes,
                p,
                q: f64::NAN,
                leading_edge,
            }
        })
        .collect();
    let p: Vec<f64> = records.iter().map(|r| r.p).collect();
    for (r, q) in records.iter_mut().zip(bh_adjust(&p)?) {
        r.q = q;
    }
    Ok(records)
}

pub fn gsea_table(records: &[GseaRecord]) -> Table {
    let mut t = Table::new(&["group", "library", "term", "n_hits", "es", "nes", "pval", "qval", "leading_edge"]);
    let mut rows: Vec<&GseaRecord> = records.iter().collect();
    rows.sort_by(|a, b| (&a.group, &a.library, &a.term).cmp(&(&b.group, &b.library, &b.term)));
    for r in rows {
        t.push(vec![
            Field::from(&r.group),
            Field::from(&r.library),
            Field::from(&r.term),
            r.n_hits.into(),
            r.es.into(),
            r.nes.into(),
            r.p.into(),
            r.q.into(),
            r.leading_edge.join(";").into(),
        ]);
    }
    t
}
