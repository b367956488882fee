use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fixed-width histogram over the half-open range `[lo, hi)`.
///
/// Running sums of every added value (in range or not) are kept so sample
/// moments do not depend on the binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    out_of_range: u64,
    total: u64,
    sum: f64,
    sum_sq: f64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bin_count: usize) -> Result<Self> {
        if bin_count == 0 {
            return Err(Error::param("bin_count", "must be positive"));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::param("range", format!("need finite lo < hi, got [{lo}, {hi})")));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bin_count],
            out_of_range: 0,
            total: 0,
            sum: 0.0,
            sum_sq: 0.0,
        })
    }

    pub fn add(&mut self, x: f64) {
        self.total += 1;
        self.sum += x;
        self.sum_sq += x * x;
        match self.bin_of(x) {
            Some(b) => self.counts[b] += 1,
            None => self.out_of_range += 1,
        }
    }

    fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x < self.hi) {
            return None;
        }
        let b = ((x - self.lo) / self.bin_width()) as usize;
        // rounding can land exactly on bin_count for x just below hi
        Some(b.min(self.counts.len() - 1))
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.bin_width()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn out_of_range(&self) -> u64 {
        self.out_of_range
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Sample mean of every value added.
    pub fn mean(&self) -> f64 {
        self.sum / self.total as f64
    }

    /// Population variance of every value added.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.sum_sq / self.total as f64 - m * m).max(0.0)
    }

    /// Normalized density estimate per bin (in-range mass divided by total).
    pub fn density(&self) -> Vec<f64> {
        let scale = 1.0 / (self.total as f64 * self.bin_width());
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }
}
