//! Paired-seed optimizer comparisons and minority-fraction sweeps.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::data::{generate_synthetic, SyntheticSpec, TabularDataset};
use super::train::{train, TrainConfig, TrainRunResult};
use crate::exec::Execution;
use crate::fairness::FairnessReport;
use crate::optim::{unique_labels, OptimizerConfig};
use crate::stats::{wilcoxon_signed_rank, SeededStream};
use crate::{Error, Result};

pub const MIN_SEEDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMetric {
    FEod,
    FEop,
    FDpa,
    GapEop,
    GapEod,
    GapDpa,
}

impl FairnessMetric {
    pub const ALL: [FairnessMetric; 6] = [
        FairnessMetric::FEod,
        FairnessMetric::FEop,
        FairnessMetric::FDpa,
        FairnessMetric::GapEop,
        FairnessMetric::GapEod,
        FairnessMetric::GapDpa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FairnessMetric::FEod => "f_eod",
            FairnessMetric::FEop => "f_eop",
            FairnessMetric::FDpa => "f_dpa",
            FairnessMetric::GapEop => "gap_eop",
            FairnessMetric::GapEod => "gap_eod",
            FairnessMetric::GapDpa => "gap_dpa",
        }
    }

    pub fn value(self, r: &FairnessReport) -> f64 {
        match self {
            FairnessMetric::FEod => r.f_eod,
            FairnessMetric::FEop => r.f_eop,
            FairnessMetric::FDpa => r.f_dpa,
            FairnessMetric::GapEop => r.gap_eop,
            FairnessMetric::GapEod => r.gap_eod,
            FairnessMetric::GapDpa => r.gap_dpa,
        }
    }
}

impl fmt::Display for FairnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Either a fixed dataset shared by every seed, or a synthetic spec drawn
/// afresh per seed from stream `(spec.master_seed, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    Fixed(TabularDataset),
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn dataset(&self, seed: u64) -> Result<Cow<'_, TabularDataset>> {
        match self {
            DataSource::Fixed(d) => Ok(Cow::Borrowed(d)),
            DataSource::Synthetic(spec) => {
                generate_synthetic(spec, &mut SeededStream::new(spec.master_seed, seed)).map(Cow::Owned)
            }
        }
    }
}

/// Wilcoxon comparison of one metric between two optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    pub metric: FairnessMetric,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean over seeds of `|metric_a − metric_b|`.
    pub mean_abs_difference: f64,
    /// `None` when the test has too few nonzero differences.
    pub p_value: Option<f64>,
    pub statistic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    /// Optimizer labels, made unique with `#k` suffixes.
    pub labels: Vec<String>,
    pub seeds: Vec<u64>,
    /// `runs[optimizer][seed]`.
    pub runs: Vec<Vec<TrainRunResult>>,
    pub tests: Vec<PairTest>,
}

impl PairedComparison {
    pub fn metric_values(&self, optimizer: usize, metric: FairnessMetric) -> Vec<f64> {
        self.runs[optimizer].iter().map(|r| metric.value(&r.fairness)).collect()
    }

    pub fn test(&self, a: usize, b: usize, metric: FairnessMetric) -> Option<&PairTest> {
        self.tests
            .iter()
            .find(|t| t.a == self.labels[a] && t.b == self.labels[b] && t.metric == metric)
    }
}

fn pair_test(a: &str, b: &str, metric: FairnessMetric, xs: &[f64], ys: &[f64]) -> Result<PairTest> {
    let n = xs.len() as f64;
    let (p_value, statistic) = match wilcoxon_signed_rank(xs, ys) {
        Ok(w) => (Some(w.p_value), Some(w.statistic)),
        Err(Error::InsufficientData(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(PairTest {
        a: a.to_string(),
        b: b.to_string(),
        metric,
        mean_a: xs.iter().sum::<f64>() / n,
        mean_b: ys.iter().sum::<f64>() / n,
        mean_abs_difference: xs.iter().zip(ys).map(|(x, y)| (x - y).abs()).sum::<f64>() / n,
        p_value,
        statistic,
    })
}

/// Trains every optimizer on every seed; `runs[optimizer][seed]`. All
/// optimizers see the same dataset and split for a given seed.
pub fn train_grid(
    source: &DataSource,
    optimizers: &[OptimizerConfig],
    seeds: &[u64],
    template: &TrainConfig,
    exec: Execution,
) -> Result<Vec<Vec<TrainRunResult>>> {
    let datasets = seeds.iter().map(|&s| source.dataset(s)).collect::<Result<Vec<_>>>()?;
    let n_seeds = seeds.len();
    let flat = exec.try_map(optimizers.len() * n_seeds, |k| {
        let (o, s) = (k / n_seeds, k % n_seeds);
        let cfg = TrainConfig {
            optimizer: optimizers[o],
            seed: seeds[s],
            ..template.clone()
        };
        train(&datasets[s], &cfg)
    })?;
    let mut runs: Vec<Vec<TrainRunResult>> = Vec::with_capacity(optimizers.len());
    let mut it = flat.into_iter();
    for _ in 0..optimizers.len() {
        runs.push(it.by_ref().take(n_seeds).collect());
    }
    Ok(runs)
}

/// Trains every optimizer on every seed (one shared split per seed) and runs
/// paired Wilcoxon tests on each fairness metric for every optimizer pair.
pub fn paired_comparison(
    source: &DataSource,
    optimizers: &[OptimizerConfig],
    seeds: &[u64],
    template: &TrainConfig,
    exec: Execution,
) -> Result<PairedComparison> {
    if seeds.len() < MIN_SEEDS {
        return Err(Error::param("seeds", format!("need at least {MIN_SEEDS}, got {}", seeds.len())));
    }
    if optimizers.is_empty() {
        return Err(Error::param("optimizers", "need at least one optimizer"));
    }
    let runs = train_grid(source, optimizers, seeds, template, exec)?;
    let labels = unique_labels(optimizers);
    let mut out = PairedComparison {
        labels,
        seeds: seeds.to_vec(),
        runs,
        tests: Vec::new(),
    };
    for a in 0..optimizers.len() {
        for b in a + 1..optimizers.len() {
            for metric in FairnessMetric::ALL {
                let t = pair_test(
                    &out.labels[a],
                    &out.labels[b],
                    metric,
                    &out.metric_values(a, metric),
                    &out.metric_values(b, metric),
                )?;
                out.tests.push(t);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub minority_fraction: f64,
    pub metric: FairnessMetric,
    pub abs_difference: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub labels: [String; 2],
    pub rows: Vec<SweepRow>,
    pub comparisons: Vec<PairedComparison>,
}

impl SweepResult {
    pub fn row(&self, fraction: f64, metric: FairnessMetric) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.minority_fraction == fraction && r.metric == metric)
    }
}

/// Paired comparison of exactly two optimizers at each minority fraction of
/// a synthetic template.
pub fn imbalance_sweep(
    template: &SyntheticSpec,
    fractions: &[f64],
    optimizers: &[OptimizerConfig; 2],
    seeds: &[u64],
    train_template: &TrainConfig,
    metrics: &[FairnessMetric],
    exec: Execution,
) -> Result<SweepResult> {
    if fractions.is_empty() || metrics.is_empty() {
        return Err(Error::param("fractions/metrics", "need at least one of each"));
    }
    let mut rows = Vec::new();
    let mut comparisons = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let spec = SyntheticSpec {
            minority_fraction: f,
            ..template.clone()
        };
        spec.validate()?;
        let cmp = paired_comparison(&DataSource::Synthetic(spec), optimizers, seeds, train_template, exec)?;
        for &metric in metrics {
            let t = cmp.test(0, 1, metric).expect("two optimizers yield one pair");
            rows.push(SweepRow {
                minority_fraction: f,
                metric,
                abs_difference: t.mean_abs_difference,
                mean_a: t.mean_a,
                mean_b: t.mean_b,
                p_value: t.p_value,
            });
        }
        comparisons.push(cmp);
    }
    let labels = unique_labels(optimizers);
    Ok(SweepResult {
        labels: [labels[0].clone(), labels[1].clone()],
        rows,
        comparisons,
    })
}
