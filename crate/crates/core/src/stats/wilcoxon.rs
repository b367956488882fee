use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Largest number of non-zero differences handled by the exact null
/// distribution under [`WilcoxonMethod::Auto`].
pub const EXACT_MAX_N: usize = 20;

const MIN_NONZERO: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WilcoxonMethod {
    /// Exact up to [`EXACT_MAX_N`] non-zero differences, normal otherwise.
    Auto,
    Exact,
    /// Normal approximation with continuity and tie corrections.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)` over midranks.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Two-sided.
    pub p_value: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

/// Paired two-sided Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped and tied magnitudes receive midranks.
pub fn wilcoxon_signed_rank(paired_a: &[f64], paired_b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(paired_a, paired_b, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    paired_a: &[f64],
    paired_b: &[f64],
    method: WilcoxonMethod,
) -> Result<WilcoxonResult> {
    if paired_a.len() != paired_b.len() {
        return Err(Error::InvalidInput(format!(
            "paired samples differ in length ({} vs {})",
            paired_a.len(),
            paired_b.len()
        )));
    }
    let diffs: Vec<f64> = paired_a
        .iter()
        .zip(paired_b)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired difference".into()));
    }
    let n = diffs.len();
    if n < MIN_NONZERO {
        return Err(Error::InsufficientData(format!(
            "{n} non-zero differences, need at least {MIN_NONZERO}"
        )));
    }

    let ranks2 = doubled_midranks(&diffs);
    let total2: u64 = ranks2.iter().sum();
    let plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let w_plus = plus2 as f64 / 2.0;
    let w_minus = (total2 - plus2) as f64 / 2.0;

    let exact = match method {
        WilcoxonMethod::Auto => n <= EXACT_MAX_N,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p_value = if exact {
        exact_p_value(&ranks2, plus2)
    } else {
        normal_p_value(&ranks2, w_plus)
    };

    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        w_plus,
        w_minus,
        p_value,
        n,
        exact,
    })
}

/// Twice the midrank of each `|d|`, so tied ranks stay integral.
fn doubled_midranks(diffs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks2 = vec![0u64; diffs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && diffs[order[end + 1]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        // 1-based positions start+1 ..= end+1; doubled midrank is their sum
        let r2 = (start + 1 + end + 1) as u64;
        for &k in &order[start..=end] {
            ranks2[k] = r2;
        }
        start = end + 1;
    }
    ranks2
}

/// Exact two-sided p-value: the share of all 2^n sign assignments whose
/// positive-rank sum lies at least as far from its null mean as observed.
/// The distribution is accumulated by subset-sum counting over doubled ranks.
fn exact_p_value(ranks2: &[u64], plus2: u64) -> f64 {
    let total2: u64 = ranks2.iter().sum();
    let mut ways = vec![0f64; total2 as usize + 1];
    ways[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if ways[s] != 0.0 {
                ways[s + r] += ways[s];
            }
        }
        reach += r;
    }
    let dev_obs = (2 * plus2 as i64 - total2 as i64).abs();
    let hits: f64 = ways
        .iter()
        .enumerate()
        .filter(|(s, _)| (2 * *s as i64 - total2 as i64).abs() >= dev_obs)
        .map(|(_, w)| *w)
        .sum();
    (hits / 2f64.powi(ranks2.len() as i32)).min(1.0)
}

fn normal_p_value(ranks2: &[u64], w_plus: f64) -> f64 {
    let n = ranks2.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks2.to_vec();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}
