//! Monte-Carlo dynamics of the two-subgroup warm-up problem and empirical
//! checkers for the update-disparity and parity-gap bounds.

mod sde;
mod theorems;
mod warmup;

pub use sde::{
    integrate_rmsprop_sde, integrate_sgd_sde, weak_approximation_gap, RmsPropSdeConfig,
    RmsPropSdePath, WeakApproximation,
};
pub use theorems::{
    check_theorem2, check_theorem3, check_variance_scaling, first_order_bounds,
    steps_for_decay, v_variance, FirstOrderBounds, Theorem2Report, Theorem3Report,
    TheoremCheckReport, VarianceScalingReport,
};
pub use warmup::{
    run_warmup, run_warmup_with, simulate_trials, stationary_histogram, ConvergenceCurve,
    InitialPoint, TrialRecord, TrialSet, WarmupConfig, WarmupDynamics,
};
