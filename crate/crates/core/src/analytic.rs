//! Closed-form stationary densities of RMSProp and SGD on the two-subgroup
//! quadratic problem, the bias threshold above which RMSProp puts more mass
//! on the fair minimum, and the density ratio there.
//!
//! Both densities are Gaussians centred on the biased minimizer `p0 − p1`:
//!
//! ```text
//! p_rms(w) = sqrt(κ/π) exp(−κ (w − (p0 − p1))²),  κ = 1 / (4 η Θ sqrt(p0 p1))
//! p_sgd(w) = sqrt(ϑ/π) exp(−ϑ (w − (p0 − p1))²),  ϑ = 1 / (8 η p0 p1)
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Standard deviations on either side of the mean covered by
/// [`StationaryParams::normalization`] and friends.
pub const QUADRATURE_HALF_WIDTH_SD: f64 = 8.0;
pub const QUADRATURE_PANELS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryParams {
    pub p0: f64,
    pub eta: f64,
    pub theta_global: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    RmsProp,
    Sgd,
}

impl StationaryParams {
    /// `Θ = 1`.
    pub fn new(p0: f64, eta: f64) -> Result<Self> {
        Self::with_theta(p0, eta, 1.0)
    }

    pub fn with_theta(p0: f64, eta: f64, theta_global: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::param("p0", format!("must lie in (0, 1), got {p0}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        if !(theta_global > 0.0 && theta_global.is_finite()) {
            return Err(Error::param("theta_global", format!("must be positive, got {theta_global}")));
        }
        Ok(Self {
            p0,
            eta,
            theta_global,
        })
    }

    pub fn p1(&self) -> f64 {
        1.0 - self.p0
    }

    /// Precision-like constant of the RMSProp density.
    pub fn kappa(&self) -> f64 {
        1.0 / (4.0 * self.eta * self.theta_global * (self.p0 * self.p1()).sqrt())
    }

    /// Precision-like constant of the SGD density.
    pub fn vartheta(&self) -> f64 {
        1.0 / (8.0 * self.eta * self.p0 * self.p1())
    }

    /// Shared mean `p0 − p1`.
    pub fn mean(&self) -> f64 {
        self.p0 - self.p1()
    }

    pub fn constant(&self, which: Optimizer) -> f64 {
        match which {
            Optimizer::RmsProp => self.kappa(),
            Optimizer::Sgd => self.vartheta(),
        }
    }

    pub fn density(&self, which: Optimizer, w: f64) -> f64 {
        let c = self.constant(which);
        (c / PI).sqrt() * (-c * (w - self.mean()).powi(2)).exp()
    }

    pub fn density_rmsprop(&self, w: f64) -> f64 {
        self.density(Optimizer::RmsProp, w)
    }

    pub fn density_sgd(&self, w: f64) -> f64 {
        self.density(Optimizer::Sgd, w)
    }

    pub fn stddev(&self, which: Optimizer) -> f64 {
        (0.5 / self.constant(which)).sqrt()
    }

    /// Bias level `|p0 − p1|` above which RMSProp's density at the fair
    /// minimum exceeds SGD's: `sqrt(½ ln(ϑ/κ) / (ϑ − κ))`.
    pub fn delta_threshold(&self) -> Result<f64> {
        let (k, t) = (self.kappa(), self.vartheta());
        if t <= k {
            return Err(Error::UndefinedThreshold(format!(
                "ϑ = {t} does not exceed κ = {k} (balanced sampling or Θ > 1)"
            )));
        }
        Ok((0.5 * (t / k).ln() / (t - k)).sqrt())
    }

    /// `p_rms(0) / p_sgd(0) = sqrt(κ/ϑ) exp((ϑ − κ)(p0 − p1)²)`.
    pub fn ratio_at_fair_min(&self) -> f64 {
        let (k, t) = (self.kappa(), self.vartheta());
        (k / t).sqrt() * ((t - k) * self.mean().powi(2)).exp()
    }

    /// Quadrature of a density over `[lo, hi]`.
    pub fn mass(&self, which: Optimizer, lo: f64, hi: f64) -> f64 {
        simpson(|w| self.density(which, w), lo, hi, QUADRATURE_PANELS)
    }

    fn quadrature_window(&self, which: Optimizer) -> (f64, f64) {
        let h = QUADRATURE_HALF_WIDTH_SD * self.stddev(which);
        (self.mean() - h, self.mean() + h)
    }

    /// Integral of the density over mean ± 8 sd.
    pub fn normalization(&self, which: Optimizer) -> f64 {
        let (lo, hi) = self.quadrature_window(which);
        self.mass(which, lo, hi)
    }

    /// First moment by quadrature over mean ± 8 sd.
    pub fn first_moment(&self, which: Optimizer) -> f64 {
        let (lo, hi) = self.quadrature_window(which);
        simpson(|w| w * self.density(which, w), lo, hi, QUADRATURE_PANELS)
    }

    /// Default plotting grid half-width, `5 / sqrt(min(κ, ϑ))`.
    pub fn grid_half_width(&self) -> f64 {
        5.0 / self.kappa().min(self.vartheta()).sqrt()
    }
}

/// Composite Simpson rule; `panels` is rounded up to an even count.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(p0: f64, eta: f64) -> StationaryParams {
        StationaryParams::new(p0, eta).unwrap()
    }

    #[test]
    fn constants_for_severe_bias() {
        let s = p(0.1, 0.1);
        assert_relative_eq!(s.kappa(), 8.333333333333334, max_relative = 1e-12);
        assert_relative_eq!(s.vartheta(), 125.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(s.density_rmsprop(-0.8), (s.kappa() / PI).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(s.density_rmsprop(-0.8), 1.6286750396763997, max_relative = 1e-12);
    }

    #[test]
    fn balanced_sampling_makes_densities_coincide() {
        let s = p(0.5, 0.1);
        assert_relative_eq!(s.kappa(), 5.0, max_relative = 1e-12);
        assert_relative_eq!(s.vartheta(), 5.0, max_relative = 1e-12);
        for i in -20..=20 {
            let w = i as f64 * 0.05;
            assert_relative_eq!(s.density_rmsprop(w), s.density_sgd(w), max_relative = 1e-12);
            assert_relative_eq!(s.density_rmsprop(w), s.density_rmsprop(-w), max_relative = 1e-12);
        }
        assert!(s.density_rmsprop(0.0) > s.density_rmsprop(0.01));
        assert_eq!(s.ratio_at_fair_min(), 1.0);
        assert!(matches!(s.delta_threshold(), Err(Error::UndefinedThreshold(_))));
    }

    #[test]
    fn delta_threshold_values() {
        assert_relative_eq!(p(0.1, 0.1).delta_threshold().unwrap(), 0.2144161984061353, max_relative = 1e-12);
        assert_relative_eq!(p(0.3, 0.1).delta_threshold().unwrap(), 0.2961665288723653, max_relative = 1e-12);
    }

    #[test]
    fn ratio_at_fair_min_matches_densities() {
        let s = p(0.1, 0.1);
        assert_relative_eq!(s.ratio_at_fair_min(), 27.116509354543607, max_relative = 1e-12);
        assert_relative_eq!(
            s.ratio_at_fair_min(),
            s.density_rmsprop(0.0) / s.density_sgd(0.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn normalization_and_mean_by_quadrature() {
        for i in 1..=9 {
            let p0 = i as f64 * 0.1;
            for &eta in &[0.01, 0.1, 0.2] {
                let s = p(p0, eta);
                for which in [Optimizer::RmsProp, Optimizer::Sgd] {
                    assert!((s.normalization(which) - 1.0).abs() < 1e-6);
                    assert!((s.first_moment(which) - s.mean()).abs() < 1e-6);
                }
            }
        }
        let s = p(0.1, 0.1);
        assert!((s.mass(Optimizer::RmsProp, -10.0, 10.0) - 1.0).abs() < 1e-6);
        assert!((s.mass(Optimizer::Sgd, -10.0, 10.0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn vartheta_dominates_kappa_with_unit_theta() {
        for i in 1..100 {
            let s = p(i as f64 / 100.0, 0.1);
            assert!(s.vartheta() >= s.kappa() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn iff_identity_on_grid() {
        for i in 1..=9 {
            let p0 = 0.05 * i as f64;
            for &eta in &[0.01, 0.1, 0.2] {
                let s = p(p0, eta);
                let bias = (s.mean()).abs();
                let delta = s.delta_threshold().unwrap();
                if (bias - delta).abs() < 1e-9 {
                    continue;
                }
                assert_eq!(s.ratio_at_fair_min() > 1.0, bias > delta, "p0={p0} eta={eta}");
            }
        }
    }

    #[test]
    fn ratio_grows_with_bias_beyond_threshold() {
        // Below the threshold the ratio dips under 1 before recovering.
        for &eta in &[0.01, 0.1, 0.2] {
            let mut prev = 0.0;
            for i in 1..=45 {
                let s = p(0.5 - 0.01 * i as f64, eta);
                if s.mean().abs() < s.delta_threshold().unwrap() {
                    assert!(s.ratio_at_fair_min() < 1.0);
                    continue;
                }
                let r = s.ratio_at_fair_min();
                assert!(r >= prev, "eta={eta} step {i}");
                prev = r;
            }
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 4);
        assert_relative_eq!(v, 3.75, max_relative = 1e-14);
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(StationaryParams::new(0.0, 0.1).is_err());
        assert!(StationaryParams::new(0.5, 0.0).is_err());
        assert!(StationaryParams::with_theta(0.5, 0.1, 0.0).is_err());
    }
}
