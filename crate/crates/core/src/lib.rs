//! Optimizer dynamics and group-fairness laboratory.
//!
//! The crate studies why adaptive optimizers (RMSProp, Adam and relatives)
//! settle closer to the fair minimum of a biased two-subgroup objective than
//! plain SGD. It bundles:
//!
//! - [`stats`]: seeded per-trial random streams, histograms and the paired
//!   Wilcoxon signed-rank test.
//! - [`subgroup`]: the two-subgroup quadratic population and the Gaussian
//!   noisy gradient oracle.
//! - [`optim`]: SGD, momentum SGD, RMSProp, Adam, AdamW and AdaBound.
//! - [`analytic`]: closed-form stationary densities, the bias threshold and
//!   the density ratio at the fair minimum.
//! - [`dynamics`]: the Monte-Carlo warm-up, Euler–Maruyama integrators and
//!   the update-disparity / parity-gap checkers.
//! - [`fairness`]: equalized odds, equal opportunity and demographic parity
//!   ratios plus their gap variants.
//! - [`trainer`]: a small supervised training harness with hand-written
//!   backpropagation, paired-seed comparisons and imbalance sweeps.
//! - [`experiment`]: presets, run configuration and CSV/JSON emission used by
//!   the `fairopt` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod fairness;
pub mod optim;
pub mod stats;
pub mod subgroup;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Execution;
