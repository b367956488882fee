//! Desk-scale supervised training: biased synthetic data, CSV ingestion,
//! logistic and one-hidden-layer models with hand-written gradients, and
//! paired-seed fairness comparisons between optimizers.

mod compare;
mod data;
mod model;
mod train;

pub use compare::{
    imbalance_sweep, paired_comparison, train_grid, DataSource, FairnessMetric, PairTest, PairedComparison, SweepResult,
    SweepRow, MIN_SEEDS,
};
pub use data::{generate_synthetic, load_csv, CsvSchema, Standardization, SyntheticSpec, TabularDataset};
pub use model::{gradient_check, LossKind, ModelKind, Network};
pub use train::{train, TrainConfig, TrainRunResult};
