//! Monte-Carlo checks of the RMSProp preconditioner bounds on a noisy
//! Gaussian gradient oracle, and of the first-order parity-gap bounds on
//! the one-dimensional subgroup model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::stats::SeededStream;
use crate::subgroup::{NgosSpec, QuadraticSubgroups, Subgroup};
use crate::{Error, Result};

/// Relative slack allowed for floating-point round-off in norm comparisons.
const NORM_SLACK: f64 = 1e-12;

/// Streams at or above this offset feed the contraction draws, so they never
/// overlap the second-moment runs.
const CONTRACTION_STREAM_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheckReport {
    pub analytic_bound: f64,
    pub empirical_value: f64,
    pub satisfied: bool,
    pub sample_count: usize,
    pub details: BTreeMap<String, f64>,
}

/// Smallest `k` with `γ^k ≤ tol`.
pub fn steps_for_decay(gamma: f64, tol: f64) -> usize {
    (tol.ln() / gamma.ln()).ceil().max(1.0) as usize
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_rmsprop_args(gamma: f64, epsilon: f64, steps: usize, draws: usize) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if steps == 0 || draws < 2 {
        return Err(Error::param("steps/draws", "need at least one step and two draws"));
    }
    Ok(())
}

/// Second-moment accumulators after `steps` RMSProp updates, one run per
/// draw; draw `i` uses stream `(master_seed, i)`.
fn simulate_v(
    spec: &NgosSpec,
    gamma: f64,
    epsilon: f64,
    steps: usize,
    draws: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    spec.check()?;
    check_rmsprop_args(gamma, epsilon, steps, draws)?;
    let mut cfg = OptimizerConfig::rmsprop(1e-3);
    cfg.gamma = gamma;
    cfg.epsilon = epsilon;
    exec.try_map(draws, |i| {
        let mut stream = SeededStream::new(master_seed, i as u64);
        let mut state = OptimizerState::new(vec![0.0; spec.dim()]);
        for _ in 0..steps {
            let (g, _) = spec.sample(&mut stream);
            state.step(&cfg, &g)?;
        }
        Ok(state.v)
    })
}

fn column_moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; d];
    for r in rows {
        for ((s, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (x - m).powi(2) / (n - 1.0);
        }
    }
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    /// Stationary preconditioner diagonal `1 / sqrt(E[g²] + ε)`.
    pub preconditioner: Vec<f64>,
    /// Every coordinate carries noise mass `p0 θ0² + p1 θ1² ≥ 1`.
    pub precondition_met: bool,
    /// Every `D_jj < 1`.
    pub strict_contraction: bool,
    /// Limit of `E[v_k]` as `k → ∞`.
    pub limit: Vec<f64>,
    /// Exact `E[v_k] = (1 − γ^k) · limit` at the simulated `k`.
    pub expected_at_steps: Vec<f64>,
    pub mc_mean: Vec<f64>,
    pub mc_stderr: Vec<f64>,
    pub limit_within_3se: bool,
    pub contraction: TheoremCheckReport,
    /// Draws with `‖D(g0 − g1)‖ > ‖g0 − g1‖` while `max D ≤ 1`.
    pub norm_violations: usize,
    pub satisfied: bool,
}

/// Checks the stationary second moment of RMSProp and the contraction of
/// subgroup gradient differences by its preconditioner.
pub fn check_theorem2(
    spec: &NgosSpec,
    gamma: f64,
    epsilon: f64,
    steps: usize,
    draws: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Theorem2Report> {
    let vs = simulate_v(spec, gamma, epsilon, steps, draws, master_seed, exec)?;
    let (mc_mean, var) = column_moments(&vs);
    let mc_stderr: Vec<f64> = var.iter().map(|v| (v / draws as f64).sqrt()).collect();
    let limit = spec.second_moment();
    let decay = 1.0 - gamma.powi(steps.min(i32::MAX as usize) as i32);
    let expected_at_steps: Vec<f64> = limit.iter().map(|l| l * decay).collect();
    let limit_within_3se = mc_mean
        .iter()
        .zip(&expected_at_steps)
        .zip(&mc_stderr)
        .all(|((m, e), se)| (m - e).abs() <= 3.0 * se + NORM_SLACK * e.abs());

    let d = spec.preconditioner_diag(epsilon);
    let d_max = d.iter().copied().fold(0.0, f64::max);
    let precondition_met = spec.noise_mass().iter().all(|&m| m >= 1.0);
    let strict_contraction = d.iter().all(|&x| x < 1.0);

    let ratios = exec.map(draws, |i| {
        let mut stream = SeededStream::new(master_seed, CONTRACTION_STREAM_OFFSET + i as u64);
        let g0 = spec.sample_from(Subgroup::Zero, &mut stream);
        let g1 = spec.sample_from(Subgroup::One, &mut stream);
        let diff: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| a - b).collect();
        let scaled: Vec<f64> = diff.iter().zip(&d).map(|(x, dj)| x * dj).collect();
        (l2(&scaled), l2(&diff))
    });
    let mut worst: f64 = 0.0;
    let mut bound_violations = 0usize;
    let mut norm_violations = 0usize;
    let mut degenerate = 0usize;
    for &(num, den) in &ratios {
        if den == 0.0 {
            degenerate += 1;
            continue;
        }
        worst = worst.max(num / den);
        if num > d_max * den * (1.0 + NORM_SLACK) {
            bound_violations += 1;
        }
        if d_max <= 1.0 && num > den * (1.0 + NORM_SLACK) {
            norm_violations += 1;
        }
    }
    let contraction = TheoremCheckReport {
        analytic_bound: d_max,
        empirical_value: worst,
        satisfied: bound_violations == 0,
        sample_count: draws - degenerate,
        details: BTreeMap::from([
            ("bound_violations".to_string(), bound_violations as f64),
            ("degenerate_draws".to_string(), degenerate as f64),
        ]),
    };
    let claim_holds = !precondition_met || strict_contraction;
    let satisfied = limit_within_3se && contraction.satisfied && norm_violations == 0 && claim_holds;
    Ok(Theorem2Report {
        preconditioner: d,
        precondition_met,
        strict_contraction,
        limit,
        expected_at_steps,
        mc_mean,
        mc_stderr,
        limit_within_3se,
        contraction,
        norm_violations,
        satisfied,
    })
}

/// Per-coordinate variance of `v_k` across `draws` independent runs.
pub fn v_variance(
    spec: &NgosSpec,
    gamma: f64,
    epsilon: f64,
    steps: usize,
    draws: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let vs = simulate_v(spec, gamma, epsilon, steps, draws, master_seed, exec)?;
    Ok(column_moments(&vs).1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScalingReport {
    pub gammas: Vec<f64>,
    pub steps: Vec<usize>,
    pub variances: Vec<Vec<f64>>,
    /// Mean over coordinates of `var(γ_i) / var(γ_0)`.
    pub observed_ratio: Vec<f64>,
    /// `(1 − γ_i) / (1 − γ_0)`.
    pub proportional_ratio: Vec<f64>,
    /// Exact stationary ratio of an exponential moving average,
    /// `[(1 − γ_i)/(1 + γ_i)] / [(1 − γ_0)/(1 + γ_0)]`.
    pub stationary_ratio: Vec<f64>,
    /// Observed ratio within a factor of 3 of the proportional one.
    pub within_factor_3: Vec<bool>,
}

/// Compares the spread of `v_k` across decay rates. Each rate runs long
/// enough for `γ^k ≤ 10⁻³`, doubled.
pub fn check_variance_scaling(
    spec: &NgosSpec,
    gammas: &[f64],
    epsilon: f64,
    draws: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<VarianceScalingReport> {
    if gammas.len() < 2 {
        return Err(Error::param("gammas", "need at least two decay rates"));
    }
    let mut steps = Vec::with_capacity(gammas.len());
    let mut variances = Vec::with_capacity(gammas.len());
    for &g in gammas {
        check_rmsprop_args(g, epsilon, 1, draws)?;
        let k = 2 * steps_for_decay(g, 1e-3);
        steps.push(k);
        variances.push(v_variance(spec, g, epsilon, k, draws, master_seed, exec)?);
    }
    let base = &variances[0];
    let observed_ratio: Vec<f64> = variances
        .iter()
        .map(|v| v.iter().zip(base).map(|(a, b)| a / b).sum::<f64>() / v.len() as f64)
        .collect();
    let g0 = gammas[0];
    let proportional_ratio: Vec<f64> = gammas.iter().map(|g| (1.0 - g) / (1.0 - g0)).collect();
    let stationary_ratio = gammas
        .iter()
        .map(|g| ((1.0 - g) / (1.0 + g)) / ((1.0 - g0) / (1.0 + g0)))
        .collect();
    let within_factor_3 = observed_ratio
        .iter()
        .zip(&proportional_ratio)
        .map(|(o, p)| *o >= p / 3.0 && *o <= p * 3.0)
        .collect();
    Ok(VarianceScalingReport {
        gammas: gammas.to_vec(),
        steps,
        variances,
        observed_ratio,
        proportional_ratio,
        stationary_ratio,
        within_factor_3,
    })
}

/// Bounds on the first-order change of `φΨ` under one SGD and one
/// preconditioned update, with the realized first-order changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderBounds {
    /// `η ‖∇Ψ‖ ‖∇L‖`.
    pub sgd_bound: f64,
    /// `η ‖D∇Ψ‖ ‖∇L‖`.
    pub rmsprop_bound: f64,
    /// `−η φ ⟨∇Ψ, ∇L⟩`.
    pub sgd_change: f64,
    /// `−η φ ⟨D∇Ψ, ∇L⟩`.
    pub rmsprop_change: f64,
}

pub fn first_order_bounds(
    d: &[f64],
    grad_psi: &[f64],
    grad: &[f64],
    eta: f64,
    phi: f64,
) -> Result<FirstOrderBounds> {
    if d.len() != grad_psi.len() || d.len() != grad.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: D {}, ∇Ψ {}, ∇L {}",
            d.len(),
            grad_psi.len(),
            grad.len()
        )));
    }
    let d_psi: Vec<f64> = d.iter().zip(grad_psi).map(|(a, b)| a * b).collect();
    let dot = |a: &[f64]| a.iter().zip(grad).map(|(x, y)| x * y).sum::<f64>();
    let g = l2(grad);
    Ok(FirstOrderBounds {
        sgd_bound: eta * l2(grad_psi) * g,
        rmsprop_bound: eta * l2(&d_psi) * g,
        sgd_change: -eta * phi * dot(grad_psi),
        rmsprop_change: -eta * phi * dot(&d_psi),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub preconditioner: f64,
    pub grad_psi: f64,
    /// `sign(L0(w) − L1(w))`.
    pub phi: f64,
    pub draws: usize,
    /// Draws with a zero stochastic gradient, where both bounds vanish.
    pub zero_gradient_draws: usize,
    /// Fraction of nonzero-gradient draws with the RMSProp bound strictly
    /// below the SGD bound.
    pub strict_fraction: f64,
    /// Fraction of draws with the RMSProp bound at most the SGD bound.
    pub weak_fraction: f64,
    /// Fraction of draws whose realized changes respect their bounds.
    pub realized_within_bounds: f64,
    pub mean_sgd_bound: f64,
    pub mean_rmsprop_bound: f64,
    /// Ratio of the RMSProp to the SGD bound against the ceiling 1.
    pub check: TheoremCheckReport,
}

/// First-order parity-gap bounds at `w`, with `D` taken from a
/// one-dimensional oracle spec.
pub fn check_theorem3(
    model: &QuadraticSubgroups,
    spec: &NgosSpec,
    epsilon: f64,
    w: f64,
    eta: f64,
    draws: usize,
    master_seed: u64,
) -> Result<Theorem3Report> {
    if spec.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "the subgroup model is one-dimensional, oracle spec has {} coordinates",
            spec.dim()
        )));
    }
    if !(eta > 0.0 && eta.is_finite()) || !w.is_finite() {
        return Err(Error::param("eta/w", "eta must be positive and w finite"));
    }
    if draws == 0 {
        return Err(Error::param("draws", "must be positive"));
    }
    let gap = model.loss_difference(w);
    if gap == 0.0 {
        return Err(Error::UndefinedSign(format!("L0 = L1 at w = {w}")));
    }
    let phi = gap.signum();
    let d = spec.preconditioner_diag(epsilon)[0];
    let grad_psi = model.loss_difference_grad();
    let mut stream = SeededStream::new(master_seed, 0);
    let (mut strict, mut weak, mut within, mut zero) = (0usize, 0usize, 0usize, 0usize);
    let (mut sum_sgd, mut sum_rms, mut worst) = (0.0, 0.0, 0.0f64);
    for _ in 0..draws {
        let (g, _) = model.sample_gradient(&mut stream, w);
        let b = first_order_bounds(&[d], &[grad_psi], &[g], eta, phi)?;
        sum_sgd += b.sgd_bound;
        sum_rms += b.rmsprop_bound;
        if g == 0.0 {
            zero += 1;
        } else {
            worst = worst.max(b.rmsprop_bound / b.sgd_bound);
            strict += usize::from(b.rmsprop_bound < b.sgd_bound);
        }
        weak += usize::from(b.rmsprop_bound <= b.sgd_bound * (1.0 + NORM_SLACK));
        let slack = |bound: f64| bound * (1.0 + NORM_SLACK);
        within += usize::from(
            b.sgd_change.abs() <= slack(b.sgd_bound) && b.rmsprop_change.abs() <= slack(b.rmsprop_bound),
        );
    }
    let n = draws as f64;
    let nonzero = draws - zero;
    let strict_fraction = if nonzero == 0 { 0.0 } else { strict as f64 / nonzero as f64 };
    let check = TheoremCheckReport {
        analytic_bound: 1.0,
        empirical_value: worst,
        satisfied: weak == draws && within == draws,
        sample_count: draws,
        details: BTreeMap::from([
            ("preconditioner".to_string(), d),
            ("strict_fraction".to_string(), strict_fraction),
        ]),
    };
    Ok(Theorem3Report {
        preconditioner: d,
        grad_psi,
        phi,
        draws,
        zero_gradient_draws: zero,
        strict_fraction,
        weak_fraction: weak as f64 / n,
        realized_within_bounds: within as f64 / n,
        mean_sgd_bound: sum_sgd / n,
        mean_rmsprop_bound: sum_rms / n,
        check,
    })
}
