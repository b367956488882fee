//! Random streams, histograms and the paired Wilcoxon signed-rank test.

mod histogram;
mod stream;
mod wilcoxon;

pub use histogram::Histogram;
pub use stream::SeededStream;
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_with, WilcoxonMethod, WilcoxonResult,
    EXACT_MAX_N,
};

/// Mean and unbiased variance of a slice; `None` for fewer than two values.
pub fn mean_variance(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
