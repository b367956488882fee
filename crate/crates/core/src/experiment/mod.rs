//! Run configuration, named presets and report emission for the `fairopt`
//! commands.
//!
//! Every run writes three files into its output directory: `config.json`
//! (the fully resolved [`RunConfig`]), `results.csv` (first line is a `#`
//! comment carrying the command, seed and compact config) and
//! `summary.json`. Nothing written depends on timing, paths of the output
//! directory or the worker count.

mod output;
mod presets;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{InitialPoint, WarmupConfig, WarmupDynamics};
use crate::fairness::FairnessOptions;
use crate::optim::OptimizerConfig;
use crate::subgroup::{NgosSpec, QuadraticSubgroups};
use crate::trainer::{CsvSchema, FairnessMetric, SyntheticSpec, TrainConfig};
use crate::{Error, Result};

pub use output::RunOutput;
pub use presets::{preset, PRESET_NAMES};
pub use run::run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Warmup,
    Density,
    Theorems,
    Train,
    Sweep,
    Metrics,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Warmup,
        Command::Density,
        Command::Theorems,
        Command::Train,
        Command::Sweep,
        Command::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Warmup => "warmup",
            Command::Density => "density",
            Command::Theorems => "theorems",
            Command::Train => "train",
            Command::Sweep => "sweep",
            Command::Metrics => "metrics",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown command `{s}`")))
    }
}

/// Monte-Carlo warm-up of several optimizers on one subgroup model. Every
/// optimizer reuses the same per-trial streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupExperiment {
    pub p0: f64,
    pub optimizers: Vec<OptimizerConfig>,
    pub trials: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub fair_center: f64,
    pub fair_threshold: f64,
    pub w0: InitialPoint,
    #[serde(default)]
    pub dynamics: WarmupDynamics,
}

impl Default for WarmupExperiment {
    fn default() -> Self {
        Self {
            p0: 0.1,
            optimizers: vec![OptimizerConfig::rmsprop(0.1), OptimizerConfig::sgd(0.1)],
            trials: 1000,
            epochs: 100,
            steps_per_epoch: 1,
            fair_center: 0.0,
            fair_threshold: 0.2,
            w0: InitialPoint::Fixed(0.0),
            dynamics: WarmupDynamics::Discrete,
        }
    }
}

impl WarmupExperiment {
    /// One validated [`WarmupConfig`] per optimizer.
    pub fn configs(&self, master_seed: u64) -> Result<Vec<WarmupConfig>> {
        if self.optimizers.is_empty() {
            return Err(Error::param("optimizers", "need at least one optimizer"));
        }
        let model = QuadraticSubgroups::new(self.p0)?;
        self.optimizers
            .iter()
            .map(|&opt| {
                let cfg = WarmupConfig {
                    model,
                    optimizer: opt,
                    trials: self.trials,
                    epochs: self.epochs,
                    steps_per_epoch: self.steps_per_epoch,
                    fair_center: self.fair_center,
                    fair_threshold: self.fair_threshold,
                    w0: self.w0,
                    master_seed,
                    dynamics: self.dynamics,
                };
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityExperiment {
    pub p0: f64,
    pub eta: f64,
    pub theta_global: f64,
    pub grid_points: usize,
    /// Half-width of the grid around the mean; `5 / sqrt(min(κ, ϑ))` when
    /// absent.
    pub grid_half_width: Option<f64>,
    /// Neighbourhood of the fair minimum whose mass is reported.
    pub fair_threshold: f64,
}

impl Default for DensityExperiment {
    fn default() -> Self {
        Self {
            p0: 0.1,
            eta: 0.1,
            theta_global: 1.0,
            grid_points: 401,
            grid_half_width: None,
            fair_threshold: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremsExperiment {
    pub spec: NgosSpec,
    pub gamma: f64,
    pub epsilon: f64,
    pub steps: usize,
    pub draws: usize,
    /// Decay rates compared in the variance check; the first is the base.
    pub variance_gammas: Vec<f64>,
    /// Iterate and learning rate of the parity-gap check, which runs on the
    /// `±1` subgroup model with the spec's `p0` (one-dimensional specs only).
    pub gap_w: f64,
    pub gap_eta: f64,
}

impl Default for TheoremsExperiment {
    fn default() -> Self {
        Self {
            spec: NgosSpec {
                mu_0: vec![1.0],
                mu_1: vec![-1.0],
                theta_0: vec![1.0],
                theta_1: vec![1.0],
                p0: 0.5,
                theta_global: 1.0,
            },
            gamma: 0.9,
            epsilon: 1e-8,
            steps: 200,
            draws: 10_000,
            variance_gammas: vec![0.9, 0.99],
            gap_w: 0.5,
            gap_eta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum DataConfig {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, schema: CsvSchema },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainExperiment {
    pub data: DataConfig,
    pub optimizers: Vec<OptimizerConfig>,
    /// Training seeds are `master_seed, master_seed + 1, ...`.
    pub n_seeds: usize,
    pub train: TrainConfig,
}

impl Default for TrainExperiment {
    fn default() -> Self {
        Self {
            data: DataConfig::Synthetic(presets::analog_template(0.22, 0)),
            optimizers: vec![
                OptimizerConfig::rmsprop(presets::ANALOG_ADAPTIVE_ETA),
                OptimizerConfig::sgd(presets::ANALOG_SGD_ETA),
            ],
            n_seeds: 1,
            train: presets::analog_train_config(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepExperiment {
    pub template: SyntheticSpec,
    pub fractions: Vec<f64>,
    pub optimizers: [OptimizerConfig; 2],
    pub n_seeds: usize,
    pub train: TrainConfig,
    pub metrics: Vec<FairnessMetric>,
}

impl Default for SweepExperiment {
    fn default() -> Self {
        Self {
            template: presets::analog_template(0.02, 0),
            fractions: vec![0.02, 0.22, 0.42],
            optimizers: [
                OptimizerConfig::rmsprop(presets::ANALOG_ADAPTIVE_ETA),
                OptimizerConfig::sgd(presets::ANALOG_SGD_ETA),
            ],
            n_seeds: 5,
            train: presets::analog_train_config(),
            metrics: vec![FairnessMetric::FDpa, FairnessMetric::FEod],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LogFormat {
    /// `group,true_class,predicted_class`, one row per sample.
    #[default]
    PredictionLog,
    /// `group,true_class,predicted_class,count`.
    CountTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsExperiment {
    pub input: PathBuf,
    pub format: LogFormat,
    pub options: FairnessOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum ExperimentConfig {
    Warmup(WarmupExperiment),
    Density(DensityExperiment),
    Theorems(TheoremsExperiment),
    Train(TrainExperiment),
    Sweep(SweepExperiment),
    Metrics(MetricsExperiment),
}

impl ExperimentConfig {
    pub fn default_for(command: Command) -> Self {
        match command {
            Command::Warmup => ExperimentConfig::Warmup(Default::default()),
            Command::Density => ExperimentConfig::Density(Default::default()),
            Command::Theorems => ExperimentConfig::Theorems(Default::default()),
            Command::Train => ExperimentConfig::Train(Default::default()),
            Command::Sweep => ExperimentConfig::Sweep(Default::default()),
            Command::Metrics => ExperimentConfig::Metrics(Default::default()),
        }
    }

    pub fn command(&self) -> Command {
        match self {
            ExperimentConfig::Warmup(_) => Command::Warmup,
            ExperimentConfig::Density(_) => Command::Density,
            ExperimentConfig::Theorems(_) => Command::Theorems,
            ExperimentConfig::Train(_) => Command::Train,
            ExperimentConfig::Sweep(_) => Command::Sweep,
            ExperimentConfig::Metrics(_) => Command::Metrics,
        }
    }
}

/// Everything a run needs apart from where to write and how many workers to
/// use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub master_seed: u64,
    pub experiment: ExperimentConfig,
}

pub const DEFAULT_SEED: u64 = 0;

/// A missing input file is a usage problem, not a runtime failure.
pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{}: no such file", path.display())))
    }
}

impl RunConfig {
    pub fn default_for(command: Command) -> Self {
        Self {
            preset: None,
            master_seed: DEFAULT_SEED,
            experiment: ExperimentConfig::default_for(command),
        }
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        preset(name)
    }

    pub fn command(&self) -> Command {
        self.experiment.command()
    }

    /// Sets the master seed, carrying it into any synthetic data spec.
    pub fn set_seed(&mut self, seed: u64) {
        self.master_seed = seed;
        match &mut self.experiment {
            ExperimentConfig::Train(t) => {
                if let DataConfig::Synthetic(s) = &mut t.data {
                    s.master_seed = seed;
                }
            }
            ExperimentConfig::Sweep(s) => s.template.master_seed = seed,
            _ => {}
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        require_file(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line() as u64,
            message: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_json_compact(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
