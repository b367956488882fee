//! Update rules for SGD, momentum SGD, RMSProp, Adam, AdamW and AdaBound.
//!
//! Epsilon placement is deliberate: RMSProp divides by `sqrt(v + ε)`, Adam
//! and its relatives by `sqrt(v̂) + ε`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Sgd,
    SgdMomentum,
    RmsProp,
    Adam,
    AdamW,
    AdaBound,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Sgd,
        Algorithm::SgdMomentum,
        Algorithm::RmsProp,
        Algorithm::Adam,
        Algorithm::AdamW,
        Algorithm::AdaBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::SgdMomentum => "sgd-momentum",
            Algorithm::RmsProp => "rmsprop",
            Algorithm::Adam => "adam",
            Algorithm::AdamW => "adamw",
            Algorithm::AdaBound => "adabound",
        }
    }

    pub fn uses_second_moment(self) -> bool {
        !matches!(self, Algorithm::Sgd | Algorithm::SgdMomentum)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("algorithm", format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    /// RMSProp decay.
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub momentum: f64,
    /// Decoupled decay, AdamW only.
    pub weight_decay: f64,
    pub adabound_final_lr: f64,
    pub adabound_gamma: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sgd,
            eta: 0.01,
            gamma: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            momentum: 0.9,
            weight_decay: 1e-4,
            adabound_final_lr: 0.1,
            adabound_gamma: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm, eta: f64) -> Self {
        Self {
            algorithm,
            eta,
            ..Self::default()
        }
    }

    pub fn sgd(eta: f64) -> Self {
        Self::new(Algorithm::Sgd, eta)
    }

    pub fn rmsprop(eta: f64) -> Self {
        Self::new(Algorithm::RmsProp, eta)
    }

    pub fn adam(eta: f64) -> Self {
        Self::new(Algorithm::Adam, eta)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &'static str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must lie in (0, 1), got {x}")))
            }
        };
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {}", self.eta)));
        }
        open_unit("gamma", self.gamma)?;
        open_unit("beta1", self.beta1)?;
        open_unit("beta2", self.beta2)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", "must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::param("weight_decay", "must be non-negative"));
        }
        if !(self.adabound_final_lr > 0.0 && self.adabound_gamma > 0.0) {
            return Err(Error::param("adabound", "final_lr and gamma must be positive"));
        }
        Ok(())
    }

    /// AdaBound clipping interval for the `k`-th update (`k >= 1`).
    pub fn adabound_bounds(&self, k: u64) -> (f64, f64) {
        let k = k.max(1) as f64;
        let lower = self.adabound_final_lr * (1.0 - 1.0 / (self.adabound_gamma * k + 1.0));
        let upper = self.adabound_final_lr * (1.0 + 1.0 / (self.adabound_gamma * k));
        (lower, upper)
    }
}

/// Iterate plus moment accumulators for one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub w: Vec<f64>,
    /// Second-moment accumulator.
    pub v: Vec<f64>,
    /// First moment (Adam family) or velocity (momentum SGD).
    pub m: Vec<f64>,
    /// Completed updates.
    pub k: u64,
}

impl OptimizerState {
    pub fn new(w: Vec<f64>) -> Self {
        let d = w.len();
        Self {
            w,
            v: vec![0.0; d],
            m: vec![0.0; d],
            k: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Applies one update with gradient `grad` evaluated at the current `w`.
    pub fn step(&mut self, config: &OptimizerConfig, grad: &[f64]) -> Result<()> {
        self.check_grad(grad)?;
        self.k += 1;
        match config.algorithm {
            Algorithm::Sgd => {
                for (w, g) in self.w.iter_mut().zip(grad) {
                    *w -= config.eta * g;
                }
            }
            Algorithm::SgdMomentum => {
                for ((w, m), g) in self.w.iter_mut().zip(&mut self.m).zip(grad) {
                    *m = config.momentum * *m + g;
                    *w -= config.eta * *m;
                }
            }
            Algorithm::RmsProp => {
                let gamma = config.gamma;
                for ((w, v), g) in self.w.iter_mut().zip(&mut self.v).zip(grad) {
                    *v = gamma * *v + (1.0 - gamma) * g * g;
                    *w -= config.eta * g / (*v + config.epsilon).sqrt();
                }
            }
            Algorithm::Adam => self.adam_update(config, grad),
            Algorithm::AdamW => {
                let shrink = config.eta * config.weight_decay;
                for w in &mut self.w {
                    *w -= shrink * *w;
                }
                self.adam_update(config, grad);
            }
            Algorithm::AdaBound => {
                let bounds = config.adabound_bounds(self.k);
                self.adabound_update(config, grad, bounds);
            }
        }
        Ok(())
    }

    fn check_grad(&self, grad: &[f64]) -> Result<()> {
        if grad.len() != self.w.len() {
            return Err(Error::InvalidInput(format!(
                "gradient has {} coordinates, iterate has {}",
                grad.len(),
                self.w.len()
            )));
        }
        if let Some(j) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient coordinate {j} = {}", grad[j])));
        }
        Ok(())
    }

    fn update_moments(&mut self, config: &OptimizerConfig, grad: &[f64]) {
        for ((m, v), g) in self.m.iter_mut().zip(&mut self.v).zip(grad) {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        }
    }

    /// `1 − β^k` with the post-increment counter.
    fn bias_corrections(&self, config: &OptimizerConfig) -> (f64, f64) {
        let k = self.k.max(1) as i32;
        (1.0 - config.beta1.powi(k), 1.0 - config.beta2.powi(k))
    }

    fn adam_update(&mut self, config: &OptimizerConfig, grad: &[f64]) {
        self.update_moments(config, grad);
        let (c1, c2) = self.bias_corrections(config);
        for ((w, m), v) in self.w.iter_mut().zip(&self.m).zip(&self.v) {
            let m_hat = m / c1;
            let v_hat = v / c2;
            *w -= config.eta * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }

    fn adabound_update(&mut self, config: &OptimizerConfig, grad: &[f64], (lower, upper): (f64, f64)) {
        self.update_moments(config, grad);
        let (c1, c2) = self.bias_corrections(config);
        for ((w, m), v) in self.w.iter_mut().zip(&self.m).zip(&self.v) {
            let rate = (config.eta / ((v / c2).sqrt() + config.epsilon)).clamp(lower, upper);
            *w -= rate * (m / c1);
        }
    }

    /// Per-coordinate multiplier the next update would apply to the
    /// (bias-corrected) gradient direction, given the current accumulators.
    pub fn effective_rate(&self, config: &OptimizerConfig) -> Result<Vec<f64>> {
        let eta = config.eta;
        let eps = config.epsilon;
        match config.algorithm {
            Algorithm::Sgd | Algorithm::SgdMomentum => {
                Err(Error::UnsupportedAlgorithm(config.algorithm.to_string()))
            }
            Algorithm::RmsProp => Ok(self.v.iter().map(|v| eta / (v + eps).sqrt()).collect()),
            Algorithm::Adam | Algorithm::AdamW => {
                let (_, c2) = self.bias_corrections(config);
                Ok(self.v.iter().map(|v| eta / ((v / c2).sqrt() + eps)).collect())
            }
            Algorithm::AdaBound => {
                let (_, c2) = self.bias_corrections(config);
                let (lo, hi) = config.adabound_bounds(self.k);
                Ok(self
                    .v
                    .iter()
                    .map(|v| (eta / ((v / c2).sqrt() + eps)).clamp(lo, hi))
                    .collect())
            }
        }
    }
}

/// Display labels for a list of configs: the algorithm name, with `#k`
/// appended to the k-th repeat of a name.
pub fn unique_labels(configs: &[OptimizerConfig]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(configs.len());
    let mut seen = std::collections::HashMap::new();
    for c in configs {
        let name = c.algorithm.name();
        let k = seen.entry(name).or_insert(0usize);
        *k += 1;
        labels.push(if *k == 1 { name.to_string() } else { format!("{name}#{k}") });
    }
    labels
}
