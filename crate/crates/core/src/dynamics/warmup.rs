use serde::{Deserialize, Serialize};

use super::sde::{sgd_sde_step, RmsPropSdeConfig};
use crate::exec::Execution;
use crate::optim::{Algorithm, OptimizerConfig, OptimizerState};
use crate::stats::{Histogram, SeededStream};
use crate::subgroup::QuadraticSubgroups;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPoint {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

impl Default for InitialPoint {
    fn default() -> Self {
        InitialPoint::Fixed(0.0)
    }
}

impl InitialPoint {
    fn draw(self, stream: &mut SeededStream) -> f64 {
        match self {
            InitialPoint::Fixed(w) => w,
            InitialPoint::Uniform { lo, hi } => lo + (hi - lo) * stream.uniform(),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            InitialPoint::Fixed(w) if w.is_finite() => Ok(()),
            InitialPoint::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            _ => Err(Error::param("w0", format!("invalid initial point {self:?}"))),
        }
    }
}

/// How a warm-up step advances the iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WarmupDynamics {
    /// Sample a subgroup gradient and apply the optimizer's update rule.
    #[default]
    Discrete,
    /// One Euler–Maruyama step of the optimizer's SDE per update, with
    /// `dt = η` for SGD and `dt = η²` for RMSProp (SGD and RMSProp only).
    Sde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupConfig {
    pub model: QuadraticSubgroups,
    pub optimizer: OptimizerConfig,
    pub trials: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub fair_center: f64,
    pub fair_threshold: f64,
    pub w0: InitialPoint,
    pub master_seed: u64,
    #[serde(default)]
    pub dynamics: WarmupDynamics,
}

impl WarmupConfig {
    /// 1000 trials of 100 single-step epochs, threshold 0.2 around 0, `w0 = 0`.
    pub fn new(model: QuadraticSubgroups, optimizer: OptimizerConfig, master_seed: u64) -> Self {
        Self {
            model,
            optimizer,
            trials: 1000,
            epochs: 100,
            steps_per_epoch: 1,
            fair_center: 0.0,
            fair_threshold: 0.2,
            w0: InitialPoint::default(),
            master_seed,
            dynamics: WarmupDynamics::Discrete,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be positive"));
        }
        if self.steps_per_epoch == 0 {
            return Err(Error::param("steps_per_epoch", "must be positive"));
        }
        if !(self.fair_threshold > 0.0 && self.fair_threshold.is_finite()) {
            return Err(Error::param("fair_threshold", "must be positive"));
        }
        if !self.fair_center.is_finite() {
            return Err(Error::param("fair_center", "must be finite"));
        }
        if self.dynamics == WarmupDynamics::Sde
            && !matches!(self.optimizer.algorithm, Algorithm::Sgd | Algorithm::RmsProp)
        {
            return Err(Error::param("dynamics", "SDE dynamics exist for SGD and RMSProp only"));
        }
        self.w0.validate()?;
        self.optimizer.validate()
    }
}

/// One trajectory: the iterate at the end of every epoch (index 0 is the
/// starting point). Entries after a divergence are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub iterates: Vec<f64>,
    /// Step index at which the iterate stopped being finite.
    pub diverged_at: Option<usize>,
}

impl TrialRecord {
    pub fn in_neighborhood(&self, epoch: usize, center: f64, threshold: f64) -> bool {
        (self.iterates[epoch] - center).abs() < threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub config: WarmupConfig,
    pub records: Vec<TrialRecord>,
}

impl TrialSet {
    pub fn diverged(&self) -> usize {
        self.records.iter().filter(|r| r.diverged_at.is_some()).count()
    }

    /// Fair-neighbourhood fractions re-evaluated on the stored iterates.
    pub fn curve(&self, center: f64, threshold: f64) -> ConvergenceCurve {
        let epochs = self.config.epochs;
        let trials = self.records.len();
        let fractions = (0..=epochs)
            .map(|e| {
                let hits = self
                    .records
                    .iter()
                    .filter(|r| r.in_neighborhood(e, center, threshold))
                    .count();
                hits as f64 / trials as f64
            })
            .collect();
        ConvergenceCurve {
            fractions,
            trials,
            diverged: self.diverged(),
            fair_center: center,
            fair_threshold: threshold,
            config: self.config.clone(),
        }
    }
}

/// Fraction of trials inside `|w − center| < threshold` at every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    /// `fractions[e]` after `e` epochs; index 0 is the initial condition.
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub diverged: usize,
    pub fair_center: f64,
    pub fair_threshold: f64,
    pub config: WarmupConfig,
}

impl ConvergenceCurve {
    pub fn final_fraction(&self) -> f64 {
        *self.fractions.last().expect("curve holds the initial epoch")
    }

    pub fn epochs(&self) -> usize {
        self.fractions.len() - 1
    }
}

pub fn run_warmup(config: &WarmupConfig) -> Result<ConvergenceCurve> {
    run_warmup_with(config, Execution::Auto)
}

pub fn run_warmup_with(config: &WarmupConfig, exec: Execution) -> Result<ConvergenceCurve> {
    let set = simulate_trials(config, exec)?;
    Ok(set.curve(config.fair_center, config.fair_threshold))
}

/// Runs every trial and keeps the per-epoch iterates. Trial `i` draws from
/// stream `(master_seed, i)`.
pub fn simulate_trials(config: &WarmupConfig, exec: Execution) -> Result<TrialSet> {
    config.validate()?;
    let records = exec.map(config.trials, |i| simulate_trial(config, i as u64));
    let set = TrialSet {
        config: config.clone(),
        records,
    };
    let diverged = set.diverged();
    if diverged > 0 {
        log::warn!(
            "{diverged} of {} {} trials diverged",
            config.trials,
            config.optimizer.algorithm
        );
    }
    Ok(set)
}

/// Single-coordinate stepper shared by the warm-up and histogram paths.
struct Walker<'a> {
    config: &'a WarmupConfig,
    state: OptimizerState,
    /// RMSProp SDE second-moment variable.
    u: f64,
}

impl<'a> Walker<'a> {
    fn new(config: &'a WarmupConfig, w0: f64) -> Self {
        Self {
            config,
            state: OptimizerState::new(vec![w0]),
            u: config.model.gradient_covariance(),
        }
    }

    fn w(&self) -> f64 {
        self.state.w[0]
    }

    /// Advances one step; `false` once the iterate is no longer finite.
    fn advance(&mut self, stream: &mut SeededStream) -> bool {
        let model = &self.config.model;
        let opt = &self.config.optimizer;
        match self.config.dynamics {
            WarmupDynamics::Discrete => {
                let (g, _) = model.sample_gradient(stream, self.w());
                if self.state.step(opt, &[g]).is_err() {
                    return false;
                }
            }
            WarmupDynamics::Sde => {
                let w = self.w();
                let z = stream.standard_normal();
                self.state.w[0] = match opt.algorithm {
                    Algorithm::RmsProp => {
                        let sde = RmsPropSdeConfig::from_optimizer(opt);
                        sde.step(model, &mut self.u, w, opt.eta * opt.eta, z).0
                    }
                    _ => sgd_sde_step(model, opt.eta, w, opt.eta, z),
                };
            }
        }
        self.w().is_finite()
    }
}

fn simulate_trial(config: &WarmupConfig, index: u64) -> TrialRecord {
    let mut stream = SeededStream::new(config.master_seed, index);
    let w0 = config.w0.draw(&mut stream);
    let mut walker = Walker::new(config, w0);
    let mut iterates = Vec::with_capacity(config.epochs + 1);
    iterates.push(w0);
    let mut diverged_at = None;
    let mut step = 0;
    for _ in 0..config.epochs {
        if diverged_at.is_none() {
            for _ in 0..config.steps_per_epoch {
                step += 1;
                if !walker.advance(&mut stream) {
                    diverged_at = Some(step);
                    break;
                }
            }
        }
        iterates.push(if diverged_at.is_some() { f64::NAN } else { walker.w() });
    }
    TrialRecord {
        iterates,
        diverged_at,
    }
}

/// Long single trajectory: after `burn_in` steps, the next `samples` iterates
/// go into a histogram over `[lo, hi)`. Uses stream `(master_seed, 0)`.
pub fn stationary_histogram(
    config: &WarmupConfig,
    burn_in: usize,
    samples: usize,
    (lo, hi, bins): (f64, f64, usize),
) -> Result<Histogram> {
    config.validate()?;
    if burn_in == 0 || samples == 0 {
        return Err(Error::param("burn_in/samples", "must be positive"));
    }
    let mut hist = Histogram::new(lo, hi, bins)?;
    let mut stream = SeededStream::new(config.master_seed, 0);
    let w0 = config.w0.draw(&mut stream);
    let mut walker = Walker::new(config, w0);
    for step in 1..=burn_in + samples {
        if !walker.advance(&mut stream) {
            return Err(Error::Diverged { step });
        }
        if step > burn_in {
            hist.add(walker.w());
        }
    }
    Ok(hist)
}
