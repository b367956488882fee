//! Euler–Maruyama integrators for the SGD and RMSProp diffusions of the
//! one-dimensional subgroup model.
//!
//! SGD time advances by `η` per update: `dW = −∇L dt + sqrt(ηΣ) dB`.
//! RMSProp time advances by `η²` per update, with
//! `dW = −P⁻¹(∇L dt + η sqrt(Σ) dB)`, `P = η sqrt(u + ε)` and
//! `du = ((1 − γ)/η²)(Σ − u) dt`.

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::optim::OptimizerConfig;
use crate::stats::SeededStream;
use crate::subgroup::QuadraticSubgroups;
use crate::{Error, Result};

pub(crate) fn sgd_sde_step(model: &QuadraticSubgroups, eta: f64, w: f64, dt: f64, z: f64) -> f64 {
    w - model.population_grad(w) * dt + (eta * model.gradient_covariance() * dt).sqrt() * z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsPropSdeConfig {
    pub eta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Starting second-moment state; the gradient covariance when absent.
    pub u0: Option<f64>,
}

impl RmsPropSdeConfig {
    pub fn from_optimizer(opt: &OptimizerConfig) -> Self {
        Self {
            eta: opt.eta,
            gamma: opt.gamma,
            epsilon: opt.epsilon,
            u0: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param("gamma", "must lie in (0, 1)"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::param("epsilon", "must be non-negative"));
        }
        if let Some(u0) = self.u0 {
            if !(u0 >= 0.0 && u0.is_finite()) {
                return Err(Error::param("u0", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// One Euler–Maruyama step. Returns the new iterate and whether `u` had
    /// to be clipped back to zero.
    pub(crate) fn step(&self, model: &QuadraticSubgroups, u: &mut f64, w: f64, dt: f64, z: f64) -> (f64, bool) {
        let sigma = model.gradient_covariance();
        let p = self.eta * (*u + self.epsilon).sqrt();
        let next = w - (model.population_grad(w) * dt + self.eta * sigma.sqrt() * dt.sqrt() * z) / p;
        *u += (1.0 - self.gamma) / (self.eta * self.eta) * (sigma - *u) * dt;
        let clipped = *u < 0.0;
        if clipped {
            *u = 0.0;
        }
        (next, clipped)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsPropSdePath {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub clipped_steps: usize,
}

fn step_count(dt: f64, total_time: f64, max_dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be positive"));
    }
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::param("dt", format!("{dt} exceeds the per-update time {max_dt}")));
    }
    if !(total_time >= 0.0 && total_time.is_finite()) {
        return Err(Error::param("total_time", "must be non-negative"));
    }
    Ok((total_time / dt).round() as usize)
}

/// Path of the SGD diffusion sampled every `dt`; element 0 is `w0`.
pub fn integrate_sgd_sde(
    model: &QuadraticSubgroups,
    eta: f64,
    dt: f64,
    total_time: f64,
    w0: f64,
    stream: &mut SeededStream,
) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", "must be positive"));
    }
    let n = step_count(dt, total_time, eta)?;
    let mut path = Vec::with_capacity(n + 1);
    let mut w = w0;
    path.push(w);
    for step in 1..=n {
        w = sgd_sde_step(model, eta, w, dt, stream.standard_normal());
        if !w.is_finite() {
            return Err(Error::Diverged { step });
        }
        path.push(w);
    }
    Ok(path)
}

/// Path of the coupled RMSProp diffusion; `dt` may not exceed `η²`.
pub fn integrate_rmsprop_sde(
    model: &QuadraticSubgroups,
    config: &RmsPropSdeConfig,
    dt: f64,
    total_time: f64,
    w0: f64,
    stream: &mut SeededStream,
) -> Result<RmsPropSdePath> {
    config.validate()?;
    let n = step_count(dt, total_time, config.eta * config.eta)?;
    let mut u = config.u0.unwrap_or_else(|| model.gradient_covariance());
    if u + config.epsilon == 0.0 {
        return Err(Error::NonFinite("preconditioner is zero (u = ε = 0)".into()));
    }
    let mut path = RmsPropSdePath {
        w: Vec::with_capacity(n + 1),
        u: Vec::with_capacity(n + 1),
        clipped_steps: 0,
    };
    let mut w = w0;
    path.w.push(w);
    path.u.push(u);
    for step in 1..=n {
        let (next, clipped) = config.step(model, &mut u, w, dt, stream.standard_normal());
        w = next;
        if !w.is_finite() {
            return Err(Error::Diverged { step });
        }
        path.clipped_steps += usize::from(clipped);
        path.w.push(w);
        path.u.push(u);
    }
    if path.clipped_steps > 0 {
        log::warn!("second-moment state clipped at zero on {} steps", path.clipped_steps);
    }
    Ok(path)
}

/// Gap between the discrete SGD iterates and the SGD diffusion, measured on
/// the test functions `w` and `w²` at every update time `kη`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakApproximation {
    pub eta: f64,
    pub paths: usize,
    pub mean_gap: Vec<f64>,
    pub second_moment_gap: Vec<f64>,
}

impl WeakApproximation {
    pub fn max_gap(&self) -> f64 {
        self.mean_gap
            .iter()
            .chain(&self.second_moment_gap)
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// Monte-Carlo weak-error estimate over `paths` independent pairs. The
/// diffusion uses `substeps` Euler steps per update; path `i` draws the
/// discrete run from stream `2i` and the diffusion from stream `2i + 1`.
#[allow(clippy::too_many_arguments)]
pub fn weak_approximation_gap(
    model: &QuadraticSubgroups,
    eta: f64,
    horizon: f64,
    w0: f64,
    paths: usize,
    substeps: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<WeakApproximation> {
    if paths == 0 || substeps == 0 {
        return Err(Error::param("paths/substeps", "must be positive"));
    }
    if !(eta > 0.0 && horizon >= 0.0) {
        return Err(Error::param("eta/horizon", "eta must be positive and horizon non-negative"));
    }
    let updates = (horizon / eta).round() as usize;
    let dt = eta / substeps as f64;
    let per_path = exec.try_map(paths, |i| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut discrete = SeededStream::new(master_seed, 2 * i as u64);
        let mut w = w0;
        let mut a = Vec::with_capacity(updates + 1);
        a.push(w);
        for step in 1..=updates {
            let (g, _) = model.sample_gradient(&mut discrete, w);
            w -= eta * g;
            if !w.is_finite() {
                return Err(Error::Diverged { step });
            }
            a.push(w);
        }
        let mut continuous = SeededStream::new(master_seed, 2 * i as u64 + 1);
        let path = integrate_sgd_sde(model, eta, dt, updates as f64 * eta, w0, &mut continuous)?;
        let b = path.iter().step_by(substeps).copied().collect();
        Ok((a, b))
    })?;
    let mut sums = vec![[0.0f64; 4]; updates + 1];
    for (a, b) in &per_path {
        for (k, acc) in sums.iter_mut().enumerate() {
            acc[0] += a[k];
            acc[1] += a[k] * a[k];
            acc[2] += b[k];
            acc[3] += b[k] * b[k];
        }
    }
    let n = paths as f64;
    Ok(WeakApproximation {
        eta,
        paths,
        mean_gap: sums.iter().map(|s| ((s[0] - s[2]) / n).abs()).collect(),
        second_moment_gap: sums.iter().map(|s| ((s[1] - s[3]) / n).abs()).collect(),
    })
}
