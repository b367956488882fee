//! Named run configurations.

use super::{
    DataConfig, ExperimentConfig, RunConfig, SweepExperiment, TrainExperiment, WarmupExperiment,
    DEFAULT_SEED,
};
use crate::optim::OptimizerConfig;
use crate::trainer::{FairnessMetric, ModelKind, SyntheticSpec, TrainConfig};
use crate::{Error, Result};

pub const PRESET_NAMES: &[&str] = &[
    "fig2-severe",
    "fig2-mild",
    "appF-1",
    "appF-2",
    "appF-3",
    "appF-4",
    "appF-5",
    "appF-6",
    "fig3-analog",
    "table2-analog",
];

/// `(η_RMSProp, η_SGD, threshold)` for the six biased warm-up scenarios.
const APP_F: [(f64, f64, f64); 6] = [
    (0.01, 0.1, 0.2),
    (0.1, 0.2, 0.2),
    (0.01, 0.1, 0.1),
    (0.01, 0.1, 0.4),
    (0.1, 0.2, 0.1),
    (0.1, 0.2, 0.4),
];

pub(crate) const ANALOG_ADAPTIVE_ETA: f64 = 0.001;
pub(crate) const ANALOG_SGD_ETA: f64 = 0.01;
const ANALOG_SAMPLES: usize = 2000;
const ANALOG_EPOCHS: usize = 3;

/// Two-feature template: the minority cluster sits off the majority along a
/// direction orthogonal to the labelling score and carries heavier label
/// noise.
pub(crate) fn analog_template(minority_fraction: f64, master_seed: u64) -> SyntheticSpec {
    let shift = 1.0 / 2f64.sqrt();
    SyntheticSpec {
        group_means: [vec![shift - 3.0, shift + 3.0], vec![0.0, 0.0]],
        group_label_flip: [0.3, 0.05],
        class_balance: 0.5,
        ..SyntheticSpec::new(ANALOG_SAMPLES, 2, minority_fraction, master_seed)
    }
}

pub(crate) fn analog_train_config() -> TrainConfig {
    TrainConfig {
        model: ModelKind::Mlp { hidden: 16 },
        epochs: ANALOG_EPOCHS,
        ..TrainConfig::default()
    }
}

fn warmup(p0: f64, eta_rms: f64, eta_sgd: f64, threshold: f64) -> ExperimentConfig {
    ExperimentConfig::Warmup(WarmupExperiment {
        p0,
        optimizers: vec![OptimizerConfig::rmsprop(eta_rms), OptimizerConfig::sgd(eta_sgd)],
        fair_threshold: threshold,
        ..WarmupExperiment::default()
    })
}

/// Resolves a preset name; unknown names list the valid ones.
pub fn preset(name: &str) -> Result<RunConfig> {
    let experiment = match name {
        "fig2-severe" => warmup(0.1, 0.1, 0.1, 0.2),
        "fig2-mild" => warmup(0.3, 0.1, 0.1, 0.2),
        "fig3-analog" => ExperimentConfig::Sweep(SweepExperiment {
            metrics: vec![FairnessMetric::FDpa],
            ..SweepExperiment::default()
        }),
        "table2-analog" => ExperimentConfig::Train(TrainExperiment {
            data: DataConfig::Synthetic(analog_template(0.02, DEFAULT_SEED)),
            optimizers: vec![
                OptimizerConfig::rmsprop(ANALOG_ADAPTIVE_ETA),
                OptimizerConfig::sgd(ANALOG_SGD_ETA),
                OptimizerConfig::adam(ANALOG_ADAPTIVE_ETA),
            ],
            n_seeds: 10,
            train: analog_train_config(),
        }),
        other => match other.strip_prefix("appF-").and_then(|k| k.parse::<usize>().ok()) {
            Some(k @ 1..=6) => {
                let (eta_rms, eta_sgd, threshold) = APP_F[k - 1];
                warmup(0.1, eta_rms, eta_sgd, threshold)
            }
            _ => {
                return Err(Error::UnknownPreset {
                    name: name.to_string(),
                    known: PRESET_NAMES.join(", "),
                })
            }
        },
    };
    Ok(RunConfig {
        preset: Some(name.to_string()),
        master_seed: DEFAULT_SEED,
        experiment,
    })
}
