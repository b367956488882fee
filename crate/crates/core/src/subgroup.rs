//! Two-subgroup population: quadratic per-subgroup losses and the Gaussian
//! noisy gradient oracle.

use serde::{Deserialize, Serialize};

use crate::stats::SeededStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subgroup {
    Zero,
    One,
}

impl Subgroup {
    pub fn index(self) -> usize {
        match self {
            Subgroup::Zero => 0,
            Subgroup::One => 1,
        }
    }

    pub fn from_index(q: usize) -> Result<Self> {
        match q {
            0 => Ok(Subgroup::Zero),
            1 => Ok(Subgroup::One),
            _ => Err(Error::param("subgroup", format!("expected 0 or 1, got {q}"))),
        }
    }

    /// Subgroup 0 with probability `p0`.
    pub fn draw(stream: &mut SeededStream, p0: f64) -> Self {
        if stream.bernoulli(p0) {
            Subgroup::Zero
        } else {
            Subgroup::One
        }
    }
}

/// Subgroup losses `½(w − center_q)²` sampled with probabilities `p0`, `1 − p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSubgroups {
    pub center_0: f64,
    pub center_1: f64,
    p0: f64,
}

impl QuadraticSubgroups {
    /// Centers `+1` and `−1`.
    pub fn new(p0: f64) -> Result<Self> {
        Self::with_centers(p0, 1.0, -1.0)
    }

    pub fn with_centers(p0: f64, center_0: f64, center_1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p0) {
            return Err(Error::param("p0", format!("must lie in [0, 1], got {p0}")));
        }
        if !(center_0.is_finite() && center_1.is_finite()) {
            return Err(Error::param("centers", "must be finite"));
        }
        Ok(Self {
            center_0,
            center_1,
            p0,
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        1.0 - self.p0
    }

    pub fn center(&self, q: Subgroup) -> f64 {
        match q {
            Subgroup::Zero => self.center_0,
            Subgroup::One => self.center_1,
        }
    }

    pub fn subgroup_loss(&self, q: Subgroup, w: f64) -> f64 {
        0.5 * (w - self.center(q)).powi(2)
    }

    pub fn subgroup_grad(&self, q: Subgroup, w: f64) -> f64 {
        w - self.center(q)
    }

    pub fn population_loss(&self, w: f64) -> f64 {
        self.p0 * self.subgroup_loss(Subgroup::Zero, w)
            + self.p1() * self.subgroup_loss(Subgroup::One, w)
    }

    /// `p0 (w − c0) + p1 (w − c1)`, i.e. `w − (p0 − p1)` for centers ±1.
    pub fn population_grad(&self, w: f64) -> f64 {
        w - self.population_minimizer()
    }

    pub fn population_minimizer(&self) -> f64 {
        self.p0 * self.center_0 + self.p1() * self.center_1
    }

    /// Variance of the sampled gradient, `p0 p1 (c0 − c1)²` (= `4 p0 p1` for ±1).
    /// It does not depend on `w`.
    pub fn gradient_covariance(&self) -> f64 {
        self.p0 * self.p1() * (self.center_0 - self.center_1).powi(2)
    }

    /// Draws a subgroup and returns its exact gradient at `w`.
    pub fn sample_gradient(&self, stream: &mut SeededStream, w: f64) -> (f64, Subgroup) {
        let q = Subgroup::draw(stream, self.p0);
        (self.subgroup_grad(q, w), q)
    }

    /// Loss-difference proxy for the demographic-parity gap, `|L0(w) − L1(w)|`.
    pub fn dp_gap(&self, w: f64) -> f64 {
        self.loss_difference(w).abs()
    }

    /// `Ψ(w) = L0(w) − L1(w)`.
    pub fn loss_difference(&self, w: f64) -> f64 {
        self.subgroup_loss(Subgroup::Zero, w) - self.subgroup_loss(Subgroup::One, w)
    }

    /// `∇Ψ(w) = ∇L0(w) − ∇L1(w) = c1 − c0`, constant in `w`.
    pub fn loss_difference_grad(&self) -> f64 {
        self.center_1 - self.center_0
    }
}

/// Gaussian noisy gradient oracle for two subgroups:
/// subgroup `q` yields `N(mu_q, diag(theta_q²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgosSpec {
    pub mu_0: Vec<f64>,
    pub mu_1: Vec<f64>,
    pub theta_0: Vec<f64>,
    pub theta_1: Vec<f64>,
    pub p0: f64,
    /// Global noise scale `Θ` of the oracle; recorded alongside the
    /// per-subgroup scales, which already carry the noise magnitude.
    #[serde(default = "one")]
    pub theta_global: f64,
}

fn one() -> f64 {
    1.0
}

impl NgosSpec {
    pub fn new(
        mu_0: Vec<f64>,
        mu_1: Vec<f64>,
        theta_0: Vec<f64>,
        theta_1: Vec<f64>,
        p0: f64,
    ) -> Result<Self> {
        let spec = Self {
            mu_0,
            mu_1,
            theta_0,
            theta_1,
            p0,
            theta_global: 1.0,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Same noise scale on every coordinate of both subgroups.
    pub fn isotropic(mu_0: Vec<f64>, mu_1: Vec<f64>, theta_0: f64, theta_1: f64, p0: f64) -> Result<Self> {
        let d = mu_0.len();
        Self::new(mu_0, mu_1, vec![theta_0; d], vec![theta_1; d], p0)
    }

    pub fn dim(&self) -> usize {
        self.mu_0.len()
    }

    pub fn p1(&self) -> f64 {
        1.0 - self.p0
    }

    /// Hard validation used before sampling; see [`validate_ngos`] for the
    /// full per-condition report.
    pub fn check(&self) -> Result<()> {
        let report = validate_ngos(self);
        match report.checks.iter().find(|c| !c.passed) {
            None => Ok(()),
            Some(c) => Err(Error::InvalidInput(format!(
                "oracle spec fails {:?}: {}",
                c.condition, c.note
            ))),
        }
    }

    pub fn is_isotropic(&self) -> bool {
        let flat = |t: &[f64]| t.windows(2).all(|w| w[0] == w[1]);
        flat(&self.theta_0) && flat(&self.theta_1)
    }

    pub fn sample(&self, stream: &mut SeededStream) -> (Vec<f64>, Subgroup) {
        let q = Subgroup::draw(stream, self.p0);
        (self.sample_from(q, stream), q)
    }

    /// Gradient drawn from a fixed subgroup.
    pub fn sample_from(&self, q: Subgroup, stream: &mut SeededStream) -> Vec<f64> {
        let (mu, theta) = match q {
            Subgroup::Zero => (&self.mu_0, &self.theta_0),
            Subgroup::One => (&self.mu_1, &self.theta_1),
        };
        mu.iter()
            .zip(theta)
            .map(|(&m, &t)| if t == 0.0 { m } else { m + t * stream.standard_normal() })
            .collect()
    }

    /// Per-coordinate second moment of the mixture,
    /// `p0 (μ0² + θ0²) + p1 (μ1² + θ1²)`: the limit of `E[v_k]` under RMSProp.
    pub fn second_moment(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                self.p0 * (self.mu_0[j].powi(2) + self.theta_0[j].powi(2))
                    + self.p1() * (self.mu_1[j].powi(2) + self.theta_1[j].powi(2))
            })
            .collect()
    }

    /// Diagonal of the stationary RMSProp preconditioner,
    /// `D_jj = 1 / sqrt(second_moment_j + ε)`.
    pub fn preconditioner_diag(&self, epsilon: f64) -> Vec<f64> {
        self.second_moment()
            .into_iter()
            .map(|s| 1.0 / (s + epsilon).sqrt())
            .collect()
    }

    /// Mixture noise mass per coordinate, `p0 θ0² + p1 θ1²`.
    pub fn noise_mass(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.p0 * self.theta_0[j].powi(2) + self.p1() * self.theta_1[j].powi(2))
            .collect()
    }
}

/// Largest admissible noise scale; stands in for the bound on the covariance
/// square root.
pub const COVARIANCE_SQRT_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NgosCondition {
    Dimensions,
    Probability,
    FiniteParameters,
    NonNegativeNoise,
    LipschitzGradient,
    BoundedCovarianceSqrt,
    SmoothDerivatives,
    LowSkewness,
    BoundedMoments,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckBasis {
    /// Evaluated on the given parameters.
    Structural,
    /// Holds for every Gaussian oracle once the structural checks pass.
    GaussianFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgosCheck {
    pub condition: NgosCondition,
    pub passed: bool,
    pub basis: CheckBasis,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgosValidation {
    pub checks: Vec<NgosCheck>,
}

impl NgosValidation {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &NgosCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Well-behavedness report for a Gaussian oracle.
///
/// Lipschitz gradient and smooth derivatives hold structurally because the
/// subgroup means are constant in `w`; skewness and moment bounds hold for
/// any Gaussian and are reported on that basis.
pub fn validate_ngos(spec: &NgosSpec) -> NgosValidation {
    let d = spec.mu_0.len();
    let dims_ok = d > 0
        && spec.mu_1.len() == d
        && spec.theta_0.len() == d
        && spec.theta_1.len() == d;
    let all = || {
        spec.mu_0
            .iter()
            .chain(&spec.mu_1)
            .chain(&spec.theta_0)
            .chain(&spec.theta_1)
            .chain([&spec.p0, &spec.theta_global])
    };
    let finite = all().all(|x| x.is_finite());
    let thetas = || spec.theta_0.iter().chain(&spec.theta_1).chain([&spec.theta_global]);
    let non_negative = thetas().all(|&t| t >= 0.0);
    let max_scale = thetas().fold(0.0f64, |m, &t| m.max(t.abs()));
    let bounded = finite && max_scale <= COVARIANCE_SQRT_BOUND;
    let structural_ok = dims_ok && finite && non_negative && bounded;

    let mut checks = vec![
        NgosCheck {
            condition: NgosCondition::Dimensions,
            passed: dims_ok,
            basis: CheckBasis::Structural,
            note: format!(
                "mu_0={}, mu_1={}, theta_0={}, theta_1={}",
                d,
                spec.mu_1.len(),
                spec.theta_0.len(),
                spec.theta_1.len()
            ),
        },
        NgosCheck {
            condition: NgosCondition::Probability,
            passed: (0.0..=1.0).contains(&spec.p0),
            basis: CheckBasis::Structural,
            note: format!("p0 = {}", spec.p0),
        },
        NgosCheck {
            condition: NgosCondition::FiniteParameters,
            passed: finite,
            basis: CheckBasis::Structural,
            note: if finite { "all finite".into() } else { "non-finite mean or scale".into() },
        },
        NgosCheck {
            condition: NgosCondition::NonNegativeNoise,
            passed: non_negative,
            basis: CheckBasis::Structural,
            note: if non_negative { "ok".into() } else { "negative noise scale".into() },
        },
        NgosCheck {
            condition: NgosCondition::LipschitzGradient,
            passed: finite,
            basis: CheckBasis::Structural,
            note: "subgroup means are constant in w".into(),
        },
        NgosCheck {
            condition: NgosCondition::BoundedCovarianceSqrt,
            passed: bounded,
            basis: CheckBasis::Structural,
            note: format!("max scale {max_scale:e} vs bound {COVARIANCE_SQRT_BOUND:e}"),
        },
        NgosCheck {
            condition: NgosCondition::SmoothDerivatives,
            passed: finite,
            basis: CheckBasis::Structural,
            note: "constant mean and covariance".into(),
        },
    ];
    for condition in [NgosCondition::LowSkewness, NgosCondition::BoundedMoments] {
        checks.push(NgosCheck {
            condition,
            passed: structural_ok,
            basis: CheckBasis::GaussianFamily,
            note: "Gaussian noise".into(),
        });
    }
    NgosValidation { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_variance;
    use approx::assert_abs_diff_eq;

    fn balanced() -> QuadraticSubgroups {
        QuadraticSubgroups::new(0.5).unwrap()
    }

    #[test]
    fn subgroup_losses() {
        let m = balanced();
        assert_eq!(m.subgroup_loss(Subgroup::Zero, 1.0), 0.0);
        assert_eq!(m.subgroup_loss(Subgroup::One, 1.0), 2.0);
        assert_eq!(m.subgroup_loss(Subgroup::Zero, 0.0), 0.5);
    }

    #[test]
    fn population_loss_at_origin() {
        assert_eq!(balanced().population_loss(0.0), 0.5);
    }

    #[test]
    fn population_minimizers() {
        assert_eq!(balanced().population_minimizer(), 0.0);
        assert_abs_diff_eq!(
            QuadraticSubgroups::new(0.9).unwrap().population_minimizer(),
            0.8,
            epsilon = 1e-15
        );
    }

    #[test]
    fn minimizer_matches_numeric_search() {
        for i in 1..20 {
            let p0 = i as f64 / 20.0;
            let m = QuadraticSubgroups::new(p0).unwrap();
            // golden-section search on the convex loss
            let (mut a, mut b) = (-3.0f64, 3.0f64);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            while b - a > 1e-13 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if m.population_loss(c) < m.population_loss(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            assert!(((a + b) / 2.0 - (p0 - (1.0 - p0))).abs() < 1e-6);
            assert!((m.population_minimizer() - (p0 - (1.0 - p0))).abs() < 1e-12);
        }
    }

    #[test]
    fn population_gradient_identities() {
        let h = 1e-5;
        for &p0 in &[0.1, 0.3, 0.5, 0.77] {
            let m = QuadraticSubgroups::new(p0).unwrap();
            for &w in &[-2.0, -0.3, 0.0, 0.4, 1.7] {
                let mix = p0 * m.subgroup_grad(Subgroup::Zero, w)
                    + (1.0 - p0) * m.subgroup_grad(Subgroup::One, w);
                assert!((m.population_grad(w) - mix).abs() < 1e-12);
                let fd = (m.population_loss(w + h) - m.population_loss(w - h)) / (2.0 * h);
                assert!((m.population_grad(w) - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dp_gap_is_twice_abs_w() {
        let m = balanced();
        assert_eq!(m.dp_gap(0.0), 0.0);
        assert_eq!(m.dp_gap(0.5), 1.0);
        assert_eq!(m.dp_gap(-2.0), 4.0);
        for i in -40..=40 {
            let w = i as f64 * 0.137;
            assert_abs_diff_eq!(m.dp_gap(w), 2.0 * w.abs(), epsilon = 1e-12);
            assert_eq!(m.dp_gap(w), m.dp_gap(-w));
        }
        assert_eq!(m.loss_difference_grad(), -2.0);
    }

    #[test]
    fn degenerate_mixture_always_subgroup_zero() {
        let m = QuadraticSubgroups::new(1.0).unwrap();
        let mut s = SeededStream::new(3, 0);
        for _ in 0..1000 {
            let (g, q) = m.sample_gradient(&mut s, 0.25);
            assert_eq!(q, Subgroup::Zero);
            assert_eq!(g, 0.25 - 1.0);
        }
    }

    #[test]
    fn sampled_gradient_moments() {
        for (k, &p0) in [0.1, 0.3, 0.5].iter().enumerate() {
            let m = QuadraticSubgroups::new(p0).unwrap();
            let mut s = SeededStream::new(17, k as u64);
            let n = 1_000_000;
            let g: Vec<f64> = (0..n).map(|_| m.sample_gradient(&mut s, 0.0).0).collect();
            let (mean, var) = mean_variance(&g).unwrap();
            let sigma2 = 4.0 * p0 * (1.0 - p0);
            assert_abs_diff_eq!(m.gradient_covariance(), sigma2, epsilon = 1e-15);
            // mean band: 3 sqrt(sigma2 / n)
            assert!((mean - (1.0 - 2.0 * p0)).abs() < 3.0 * (sigma2 / n as f64).sqrt());
            // variance band: 3 sqrt((mu4 - sigma^4) / n) for the two-point law
            let mu4 = sigma2 * sigma2 * (1.0 - 3.0 * p0 * (1.0 - p0)) / (p0 * (1.0 - p0));
            // plus a 10 sigma2 / n allowance for the estimated mean, which is
            // all that remains when g² is constant (p0 = 0.5)
            let band = 3.0 * ((mu4 - sigma2 * sigma2) / n as f64).sqrt() + 10.0 * sigma2 / n as f64;
            assert!((var - sigma2).abs() < band, "p0={p0}: var {var} vs {sigma2} ± {band}");
        }
    }

    #[test]
    fn noiseless_oracle_returns_mean() {
        let spec = NgosSpec::new(vec![0.3, -1.0], vec![2.0, 2.0], vec![0.0; 2], vec![0.0; 2], 1.0).unwrap();
        let mut s = SeededStream::new(0, 0);
        for _ in 0..10 {
            let (g, q) = spec.sample(&mut s);
            assert_eq!(q, Subgroup::Zero);
            assert_eq!(g, vec![0.3, -1.0]);
        }
    }

    #[test]
    fn oracle_mixture_moments() {
        let spec = NgosSpec::isotropic(vec![1.0], vec![-1.0], 1.0, 1.0, 0.5).unwrap();
        let mut s = SeededStream::new(23, 0);
        let n = 1_000_000;
        let g: Vec<f64> = (0..n).map(|_| spec.sample(&mut s).0[0]).collect();
        let m1 = g.iter().sum::<f64>() / n as f64;
        let m2 = g.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // mixture variance 2, fourth moment E[(±1+z)^4] = 1 + 6 + 3 = 10
        assert!(m1.abs() < 3.0 * (2.0 / n as f64).sqrt());
        assert!((m2 - 2.0).abs() < 3.0 * ((10.0 - 4.0) / n as f64).sqrt());
        assert_eq!(spec.second_moment(), vec![2.0]);
    }

    #[test]
    fn validation_accepts_gaussian_spec() {
        let spec = NgosSpec::isotropic(vec![1.0, 0.0], vec![-1.0, 0.5], 1.0, 0.7, 0.2).unwrap();
        assert!(validate_ngos(&spec).all_passed());
    }

    #[test]
    fn validation_names_negative_scale() {
        let mut spec = NgosSpec::isotropic(vec![1.0], vec![-1.0], 1.0, 1.0, 0.5).unwrap();
        spec.theta_0[0] = -0.1;
        let report = validate_ngos(&spec);
        let failed: Vec<_> = report.failed().map(|c| c.condition).collect();
        assert!(failed.contains(&NgosCondition::NonNegativeNoise));
        assert!(spec.check().is_err());
    }

    #[test]
    fn validation_flags_infinite_mean() {
        let mut spec = NgosSpec::isotropic(vec![1.0], vec![-1.0], 1.0, 1.0, 0.5).unwrap();
        spec.mu_1[0] = f64::INFINITY;
        let report = validate_ngos(&spec);
        assert!(report.failed().any(|c| c.condition == NgosCondition::FiniteParameters));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(NgosSpec::new(vec![1.0, 2.0], vec![1.0], vec![1.0; 2], vec![1.0; 2], 0.5).is_err());
    }
}
