//! Small statistical primitives shared by the DE, enrichment and validation
//! modules.

use std::cmp::Ordering;

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Average (fractional) ranks, 1-based. Ties share the mean of the ranks they
/// span. NaN is not allowed.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Sizes of tie blocks in `values` (blocks of size 1 included).
pub fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

/// Benjamini-Hochberg step-up adjustment. Output is in input order.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>> {
    for &x in p {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidProbability(x));
        }
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    // stable sort keeps ties in input order, so equal inputs get equal outputs
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap_or(Ordering::Equal));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (pos, &i) in order.iter().enumerate().rev() {
        let rank = (pos + 1) as f64;
        let candidate = p[i] * m as f64 / rank;
        running = running.min(candidate);
        q[i] = running.min(1.0);
    }
    Ok(q)
}

/// Two-sided standard normal tail probability `P(|Z| >= |z|)`.
pub fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided Student t tail probability `P(|T| >= |t|)` with `df` degrees of
/// freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}
