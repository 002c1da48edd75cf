//! One-sided Wilcoxon signed-rank test of `median > tau`.
//!
//! Exact zeros are dropped and tied magnitudes receive mid-ranks. The null
//! distribution is exact (enumerated over sign assignments of the observed
//! mid-ranks) for up to [`EXACT_MAX_N`] non-zero differences; above that a
//! continuity-corrected normal approximation with tie correction is used.

use crate::error::{Error, Result};
use crate::numeric::normal::normal_sf;

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRankTest {
    /// Sum of the ranks of the positive differences.
    pub w_plus: f64,
    pub p_value: f64,
    /// Number of non-zero differences that entered the ranking.
    pub n_used: usize,
    pub exact: bool,
}

/// Mid-ranks of `values` (1-based), doubled so that they are integers.
pub(crate) fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share the mean (start + 1 + end) / 2
        let doubled = (start + 1 + end) as u64;
        for &k in &order[start..end] {
            ranks[k] = doubled;
        }
        start = end;
    }
    ranks
}

pub fn wilcoxon_signed_rank(values: &[f64], tau: f64) -> Result<SignedRankTest> {
    if values.len() < 3 {
        return Err(Error::InsufficientProbes {
            needed: 3,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) || !tau.is_finite() {
        return Err(Error::InvalidParameter("signed-rank test needs finite values".into()));
    }
    let diffs: Vec<f64> = values.iter().map(|v| v - tau).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(SignedRankTest {
            w_plus: 0.0,
            p_value: 1.0,
            n_used: 0,
            exact: true,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&magnitudes);
    let w2: u64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let w_plus = w2 as f64 / 2.0;

    if n <= EXACT_MAX_N {
        let p_value = exact_upper_tail(&ranks, w2);
        return Ok(SignedRankTest {
            w_plus,
            p_value,
            n_used: n,
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean - 0.5) / var.sqrt();
    Ok(SignedRankTest {
        w_plus,
        p_value: normal_sf(z).clamp(0.0, 1.0),
        n_used: n,
        exact: false,
    })
}

pub fn wilcoxon_signed_rank_p(values: &[f64], tau: f64) -> Result<f64> {
    wilcoxon_signed_rank(values, tau).map(|t| t.p_value)
}

/// `P(S >= observed)` where `S` sums a uniformly random subset of `ranks`.
fn exact_upper_tail(ranks: &[u64], observed: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    let tail: u64 = counts[observed as usize..].iter().sum();
    tail as f64 / (1u64 << ranks.len()) as f64
}
