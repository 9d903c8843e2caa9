//! Wilcoxon rank-sum (Mann-Whitney) test with the normal approximation.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::stats::{average_ranks, normal_two_sided, tie_sizes};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumResult {
    pub z: f64,
    pub p: f64,
}

impl RankSumResult {
    pub const NULL: RankSumResult = RankSumResult { z: 0.0, p: 1.0 };
}

/// Rank-sum z of `a` against `b` on the pooled, tie-averaged ranks.
/// No continuity correction. A zero variance yields `z = 0, p = 1`.
pub fn rank_sum_z(a: &[f64], b: &[f64], tie_correct: bool) -> Result<RankSumResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("rank-sum test needs two non-empty samples".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum: f64 = ranks[..a.len()].iter().sum();
    let ties = if tie_correct {
        tie_sizes(&pooled)
            .into_iter()
            .map(|t| (t as u128).pow(3) - t as u128)
            .sum()
    } else {
        0
    };
    Ok(finish(a.len(), b.len(), rank_sum, ties))
}

fn finish(n_a: usize, n_b: usize, rank_sum: f64, tie_term: u128) -> RankSumResult {
    let (na, nb) = (n_a as f64, n_b as f64);
    let n = na + nb;
    let mean = na * (n + 1.0) / 2.0;
    let n_int = (n_a + n_b) as u128;
    let correction = tie_term as f64 / (n_int * (n_int - 1)) as f64;
    let var = na * nb / 12.0 * ((n + 1.0) - correction);
    if var <= 0.0 {
        return RankSumResult::NULL;
    }
    let z = (rank_sum - mean) / var.sqrt();
    RankSumResult {
        z,
        p: normal_two_sided(z),
    }
}

/// Rank-sum test on non-negative data where most values are an implicit
/// zero. `a_nonzero`/`b_nonzero` hold the strictly positive values of groups
/// of total size `n_a`/`n_b`; they are sorted in place.
///
/// Rank sums are accumulated as exact integers (twice the rank), so the
/// statistic does not depend on summation order.
pub fn rank_sum_sparse(
    a_nonzero: &mut [f64],
    n_a: usize,
    b_nonzero: &mut [f64],
    n_b: usize,
    tie_correct: bool,
) -> RankSumResult {
    debug_assert!(a_nonzero.len() <= n_a && b_nonzero.len() <= n_b);
    if n_a == 0 || n_b == 0 {
        return RankSumResult::NULL;
    }
    let cmp = |x: &f64, y: &f64| x.partial_cmp(y).unwrap_or(Ordering::Equal);
    a_nonzero.sort_unstable_by(cmp);
    b_nonzero.sort_unstable_by(cmp);

    let zeros_a = (n_a - a_nonzero.len()) as u128;
    let zeros = zeros_a + (n_b - b_nonzero.len()) as u128;
    // twice the rank sum of group a; zeros occupy ranks 1..=zeros
    let mut twice_rank_sum: u128 = zeros_a * (zeros + 1);
    let mut tie_term: u128 = zeros.pow(3) - zeros;

    let (mut i, mut j) = (0usize, 0usize);
    let mut next_rank = zeros + 1;
    while i < a_nonzero.len() || j < b_nonzero.len() {
        let v = match (a_nonzero.get(i), b_nonzero.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let mut in_a = 0u128;
        while i < a_nonzero.len() && a_nonzero[i] == v {
            in_a += 1;
            i += 1;
        }
        let mut in_b = 0u128;
        while j < b_nonzero.len() && b_nonzero[j] == v {
            in_b += 1;
            j += 1;
        }
        let t = in_a + in_b;
        let last = next_rank + t - 1;
        twice_rank_sum += in_a * (next_rank + last);
        tie_term += t.pow(3) - t;
        next_rank += t;
    }
    let tie_term = if tie_correct { tie_term } else { 0 };
    finish(n_a, n_b, twice_rank_sum as f64 / 2.0, tie_term)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_example() {
        let r = rank_sum_z(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], true).unwrap();
        // (6 - 10.5) / sqrt(5.25)
        assert!((r.z - (-4.5 / 5.25f64.sqrt())).abs() < 1e-12);
        assert!((r.z + 1.9640).abs() < 1e-3);
        assert!((r.p - 0.0495).abs() < 1e-4);
    }

    #[test]
    fn symmetric_and_degenerate() {
        assert_eq!(rank_sum_z(&[1.0, 2.0], &[1.0, 2.0], true).unwrap(), RankSumResult::NULL);
        assert_eq!(rank_sum_z(&[3.0; 3], &[3.0; 3], true).unwrap(), RankSumResult::NULL);
        let r = rank_sum_z(&[3.0; 3], &[3.0; 3], false).unwrap();
        assert_eq!((r.z, r.p), (0.0, 1.0));
        assert!(rank_sum_z(&[], &[1.0], true).is_err());
    }

    #[test]
    fn sparse_matches_dense_with_zeros() {
        let a = [0.0, 0.0, 1.5, 2.0, 2.0, 0.0];
        let b = [0.0, 2.0, 3.0, 0.5];
        for tie in [true, false] {
            let dense = rank_sum_z(&a, &b, tie).unwrap();
            let mut an: Vec<f64> = a.iter().copied().filter(|&v| v > 0.0).collect();
            let mut bn: Vec<f64> = b.iter().copied().filter(|&v| v > 0.0).collect();
            let sparse = rank_sum_sparse(&mut an, a.len(), &mut bn, b.len(), tie);
            assert!((dense.z - sparse.z).abs() < 1e-12);
            assert!((dense.p - sparse.p).abs() < 1e-12);
        }
        assert_eq!(rank_sum_sparse(&mut [], 5, &mut [], 7, true), RankSumResult::NULL);
    }

    #[test]
    fn tie_correction_increases_magnitude() {
        let a = [0.0, 0.0, 0.0, 1.0, 1.0];
        let b = [1.0, 1.0, 2.0, 2.0, 2.0];
        let with = rank_sum_z(&a, &b, true).unwrap();
        let without = rank_sum_z(&a, &b, false).unwrap();
        assert!(with.z.abs() > without.z.abs());
        assert!(with.p < without.p);
    }
}
