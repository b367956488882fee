use serde::{Deserialize, Serialize};

use super::data::{Standardization, TabularDataset};
use super::model::{LossKind, ModelKind, Network};
use crate::fairness::{confusion_from_predictions, evaluate, FairnessOptions, FairnessReport};
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::stats::SeededStream;
use crate::{Error, Result};

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Logistic,
            loss: LossKind::CrossEntropy,
            optimizer: OptimizerConfig::sgd(0.1),
            epochs: 100,
            batch_size: 32,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        self.loss.validate(n_classes)?;
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunResult {
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub final_weights: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Binary: F1 of class 1. Multi-class: macro average.
    pub f1: f64,
    pub fairness: FairnessReport,
    /// Mean training loss before training and after every epoch.
    pub loss_curve: Vec<f64>,
    pub standardization: Standardization,
}

impl TrainRunResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_curve.last().expect("curve holds the initial loss")
    }
}

fn gather(data: &TabularDataset, rows: &[usize], std: &Standardization) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut xs = Vec::with_capacity(rows.len() * data.n_features);
    for &r in rows {
        xs.extend(std.apply(data.row(r)));
    }
    let ys = rows.iter().map(|&r| data.labels[r]).collect();
    let gs = rows.iter().map(|&r| data.groups[r]).collect();
    (xs, ys, gs)
}

fn f1_score(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let f1_of = |c: usize| {
        let tp = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p == c).count() as f64;
        let fp = truth.iter().zip(pred).filter(|(t, p)| **t != c && **p == c).count() as f64;
        let fne = truth.iter().zip(pred).filter(|(t, p)| **t == c && **p != c).count() as f64;
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fne)
        }
    };
    if n_classes == 2 {
        f1_of(1)
    } else {
        (0..n_classes).map(f1_of).sum::<f64>() / n_classes as f64
    }
}

fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Mini-batch training with a seeded split, initialization and per-epoch
/// shuffle. Features are standardized with training-split statistics.
pub fn train(data: &TabularDataset, config: &TrainConfig) -> Result<TrainRunResult> {
    data.validate()?;
    config.validate(data.n_classes)?;
    let (train_rows, test_rows) = data.split(config.test_fraction, config.seed)?;
    let std = Standardization::fit(data, &train_rows);
    let (xs, ys, _) = gather(data, &train_rows, &std);
    let (test_xs, test_ys, test_gs) = gather(data, &test_rows, &std);

    let net = Network::new(config.model, data.n_features, data.n_classes)?;
    let mut state = OptimizerState::new(net.init(&mut SeededStream::new(config.seed, INIT_STREAM)));
    let mut shuffle = SeededStream::new(config.seed, SHUFFLE_STREAM);
    let d = data.n_features;

    let check = |loss: f64, epoch: usize| {
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::NonFinite(format!(
                "training loss is {loss} after epoch {epoch} with {} at eta {}; the learning rate is likely too high",
                config.optimizer.algorithm, config.optimizer.eta
            )))
        }
    };
    let mut loss_curve = Vec::with_capacity(config.epochs + 1);
    loss_curve.push(check(net.loss(&state.w, &config.loss, &xs, &ys), 0)?);
    let mut order: Vec<usize> = (0..ys.len()).collect();
    let mut bx = Vec::with_capacity(config.batch_size * d);
    let mut by = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        shuffle.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            bx.clear();
            by.clear();
            for &i in batch {
                bx.extend_from_slice(&xs[i * d..(i + 1) * d]);
                by.push(ys[i]);
            }
            let (_, grad) = net.loss_and_grad(&state.w, &config.loss, &bx, &by);
            state.step(&config.optimizer, &grad).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch}: {m}; the learning rate is likely too high")),
                other => other,
            })?;
        }
        loss_curve.push(check(net.loss(&state.w, &config.loss, &xs, &ys), epoch)?);
    }

    let predict = |xs: &[f64]| -> Vec<usize> { xs.chunks(d).map(|x| net.predict(&state.w, x)).collect() };
    let train_pred = predict(&xs);
    let test_pred = predict(&test_xs);
    let table = confusion_from_predictions(&test_gs, &test_ys, &test_pred, data.n_groups, data.n_classes)?;
    let fairness = evaluate(&table, &FairnessOptions::default())?;
    Ok(TrainRunResult {
        optimizer: config.optimizer,
        seed: config.seed,
        train_accuracy: accuracy(&ys, &train_pred),
        test_accuracy: accuracy(&test_ys, &test_pred),
        f1: f1_score(&test_ys, &test_pred, data.n_classes),
        fairness,
        loss_curve,
        standardization: std,
        final_weights: state.w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::Algorithm;
    use crate::trainer::data::{generate_synthetic, SyntheticSpec};

    fn separable(seed: u64) -> TabularDataset {
        let mut spec = SyntheticSpec::new(400, 2, 0.3, seed);
        spec.score_weights = Some(vec![1.0, -0.5]);
        generate_synthetic(&spec, &mut SeededStream::new(seed, 100)).unwrap()
    }

    /// Independent check that the generated data are separable: a perceptron
    /// run on the raw features reaches zero training errors.
    fn perceptron_separates(data: &TabularDataset) -> bool {
        let mut w = [0.0f64; 3];
        for _ in 0..10_000 {
            let mut errors = 0;
            for i in 0..data.len() {
                let x = data.row(i);
                let y = if data.labels[i] == 1 { 1.0 } else { -1.0 };
                let s = w[0] * x[0] + w[1] * x[1] + w[2];
                if y * s <= 0.0 {
                    w[0] += y * x[0];
                    w[1] += y * x[1];
                    w[2] += y;
                    errors += 1;
                }
            }
            if errors == 0 {
                return true;
            }
        }
        false
    }

    #[test]
    fn separable_data_trains_to_high_accuracy() {
        let data = separable(4);
        assert!(perceptron_separates(&data));
        let cfg = TrainConfig {
            epochs: 200,
            ..Default::default()
        };
        let r = train(&data, &cfg).unwrap();
        assert!(r.test_accuracy >= 0.95, "{}", r.test_accuracy);
        assert!(r.final_loss() < r.loss_curve[0]);
        assert_eq!(r.loss_curve.len(), 201);
    }

    #[test]
    fn zero_epochs_echo_initial_weights() {
        let data = separable(5);
        let cfg = TrainConfig {
            epochs: 0,
            seed: 3,
            ..Default::default()
        };
        let r = train(&data, &cfg).unwrap();
        let net = Network::new(ModelKind::Logistic, 2, 2).unwrap();
        assert_eq!(r.final_weights, net.init(&mut SeededStream::new(3, INIT_STREAM)));
        assert_eq!(r.loss_curve.len(), 1);
        assert!((0.0..=1.0).contains(&r.test_accuracy));
    }

    #[test]
    fn every_default_optimizer_lowers_training_loss() {
        let data = separable(6);
        for alg in Algorithm::ALL {
            for model in [ModelKind::Logistic, ModelKind::Mlp { hidden: 16 }] {
                let eta = if alg.uses_second_moment() { 0.01 } else { 0.1 };
                let cfg = TrainConfig {
                    model,
                    optimizer: OptimizerConfig::new(alg, eta),
                    epochs: 10,
                    ..Default::default()
                };
                let r = train(&data, &cfg).unwrap();
                assert!(r.final_loss() < r.loss_curve[0], "{alg} {model:?}");
                assert!((0.0..=1.0).contains(&r.f1));
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(7);
        let cfg = TrainConfig {
            model: ModelKind::Mlp { hidden: 8 },
            loss: LossKind::focal_default(),
            optimizer: OptimizerConfig::adam(0.01),
            epochs: 5,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(train(&data, &cfg).unwrap(), train(&data, &cfg).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let mut spec = SyntheticSpec::new(200, 2, 0.3, 1);
        spec.group_label_flip = [0.3, 0.3];
        let data = generate_synthetic(&spec, &mut SeededStream::new(1, 0)).unwrap();
        let cfg = TrainConfig {
            // the update overflows the logits
            optimizer: OptimizerConfig::sgd(1e308),
            epochs: 3,
            ..Default::default()
        };
        let r = train(&data, &cfg);
        assert!(matches!(r, Err(Error::NonFinite(_))), "{r:?}");
    }

    #[test]
    fn f1_values() {
        assert_eq!(f1_score(&[1, 1, 0, 0], &[1, 0, 1, 0], 2), 0.5);
        assert_eq!(f1_score(&[0, 0], &[0, 0], 2), 0.0);
        assert!((f1_score(&[0, 1, 2], &[0, 1, 2], 3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn batch_size_zero_rejected() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(matches!(train(&separable(1), &cfg), Err(Error::InvalidParameter { .. })));
    }
}
