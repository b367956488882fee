use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Deterministic random stream keyed by `(master_seed, stream_index)`.
///
/// Backed by ChaCha8 with the stream index mapped onto the cipher's stream
/// selector, so distinct trials never share state and any stream can be
/// rebuilt on any thread.
#[derive(Debug, Clone)]
pub struct SeededStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl SeededStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// `true` with probability `p` (`p >= 1` is always true, `p <= 0` never).
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// One draw from `N(mean, stddev²)`; `stddev == 0` returns `mean` exactly.
    pub fn gaussian(&mut self, mean: f64, stddev: f64) -> Result<f64> {
        if !(stddev >= 0.0) || !stddev.is_finite() {
            return Err(Error::param(
                "stddev",
                format!("must be finite and non-negative, got {stddev}"),
            ));
        }
        if stddev == 0.0 {
            return Ok(mean);
        }
        Ok(mean + stddev * self.standard_normal())
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.random_range(0..=i);
            items.swap(i, j);
        }
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_variance;

    #[test]
    fn same_key_same_sequence() {
        let mut a = SeededStream::new(7, 3);
        let mut b = SeededStream::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_index_different_sequence() {
        let mut a = SeededStream::new(7, 3);
        let mut b = SeededStream::new(7, 4);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn degenerate_gaussian_returns_mean() {
        let mut s = SeededStream::new(1, 0);
        assert_eq!(s.gaussian(3.0, 0.0).unwrap(), 3.0);
    }

    #[test]
    fn negative_stddev_is_rejected() {
        let mut s = SeededStream::new(1, 0);
        assert!(matches!(
            s.gaussian(0.0, -1.0),
            Err(Error::InvalidParameter { name: "stddev", .. })
        ));
    }

    #[test]
    fn standard_normal_moments() {
        let mut s = SeededStream::new(11, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.gaussian(0.0, 1.0).unwrap()).collect();
        let (m, _) = mean_variance(&xs).unwrap();
        // 3 / sqrt(1e6)
        assert!(m.abs() < 0.004, "mean {m}");
    }

    #[test]
    fn scaled_normal_variance() {
        let mut s = SeededStream::new(12, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.gaussian(0.0, 2.0).unwrap()).collect();
        let (_, v) = mean_variance(&xs).unwrap();
        // 3 * sqrt(2 sigma^4 / n) with sigma^2 = 4
        assert!((v - 4.0).abs() < 0.017, "variance {v}");
    }

    #[test]
    fn cross_stream_correlation_is_negligible() {
        let n = 200_000;
        let mut a = SeededStream::new(5, 0);
        let mut b = SeededStream::new(5, 1);
        let c: f64 = (0..n)
            .map(|_| a.standard_normal() * b.standard_normal())
            .sum::<f64>()
            / n as f64;
        assert!(c.abs() < 4.0 / (n as f64).sqrt(), "correlation {c}");
    }
}
