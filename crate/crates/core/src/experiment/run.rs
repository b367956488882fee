//! One runner per command. Each computes everything before touching the
//! output directory, so validation failures leave no partial files behind.

use std::path::Path;

use serde_json::{json, Value};

use super::output::{num, write_run, Table};
use super::{
    require_file, DataConfig, DensityExperiment, ExperimentConfig, LogFormat, MetricsExperiment, RunConfig, RunOutput,
    SweepExperiment, TheoremsExperiment, TrainExperiment, WarmupExperiment,
};
use crate::analytic::{Optimizer, StationaryParams};
use crate::dynamics::{check_theorem2, check_theorem3, check_variance_scaling, run_warmup_with};
use crate::fairness::{evaluate, load_count_table, load_prediction_log};
use crate::optim::{unique_labels, Algorithm};
use crate::subgroup::{validate_ngos, QuadraticSubgroups};
use crate::trainer::{
    imbalance_sweep, load_csv, paired_comparison, train_grid, DataSource, FairnessMetric, PairTest,
    TrainRunResult, MIN_SEEDS,
};
use crate::{Error, Execution, Result};

/// Runs `config` and writes `config.json`, `results.csv` and `summary.json`
/// into `out`.
pub fn run(config: &RunConfig, out: &Path, exec: Execution) -> Result<RunOutput> {
    let seed = config.master_seed;
    let (table, results) = match &config.experiment {
        ExperimentConfig::Warmup(e) => warmup(e, seed, exec)?,
        ExperimentConfig::Density(e) => density(e)?,
        ExperimentConfig::Theorems(e) => theorems(e, seed, exec)?,
        ExperimentConfig::Train(e) => train(e, seed, exec)?,
        ExperimentConfig::Sweep(e) => sweep(e, seed, exec)?,
        ExperimentConfig::Metrics(e) => metrics(e)?,
    };
    write_run(config, out, &table, results)
}

fn stationary_algorithm(a: Algorithm) -> Option<Optimizer> {
    match a {
        Algorithm::Sgd => Some(Optimizer::Sgd),
        Algorithm::RmsProp => Some(Optimizer::RmsProp),
        _ => None,
    }
}

fn warmup(e: &WarmupExperiment, seed: u64, exec: Execution) -> Result<(Table, Value)> {
    let configs = e.configs(seed)?;
    let labels = unique_labels(&e.optimizers);
    let curves = configs
        .iter()
        .map(|c| run_warmup_with(c, exec))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["epoch", "optimizer", "fraction_fair"]);
    for epoch in 1..=e.epochs {
        for (label, curve) in labels.iter().zip(&curves) {
            table.push(vec![epoch.to_string(), label.clone(), num(curve.fractions[epoch])]);
        }
    }
    let per_optimizer: Vec<Value> = labels
        .iter()
        .zip(&curves)
        .map(|(label, curve)| {
            let opt = curve.config.optimizer;
            // Closed-form stationary mass of the same neighbourhood, where a
            // density exists.
            let stationary_mass = stationary_algorithm(opt.algorithm)
                .filter(|_| e.p0 > 0.0 && e.p0 < 1.0)
                .and_then(|which| {
                    let p = StationaryParams::new(e.p0, opt.eta).ok()?;
                    Some(p.mass(which, e.fair_center - e.fair_threshold, e.fair_center + e.fair_threshold))
                });
            json!({
                "label": label,
                "algorithm": opt.algorithm.name(),
                "eta": opt.eta,
                "initial_fraction": curve.fractions[0],
                "final_fraction": curve.final_fraction(),
                "diverged_trials": curve.diverged,
                "trials": curve.trials,
                "stationary_mass": stationary_mass,
            })
        })
        .collect();
    Ok((table, json!({ "optimizers": per_optimizer })))
}

fn density(e: &DensityExperiment) -> Result<(Table, Value)> {
    let params = StationaryParams::with_theta(e.p0, e.eta, e.theta_global)?;
    if e.grid_points < 2 {
        return Err(Error::param("grid_points", "need at least 2"));
    }
    let half = match e.grid_half_width {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(_) => return Err(Error::param("grid_half_width", "must be positive and finite")),
        None => params.grid_half_width(),
    };
    let (lo, hi) = (params.mean() - half, params.mean() + half);
    let step = (hi - lo) / (e.grid_points - 1) as f64;
    let mut table = Table::new(&["w", "p_rms", "p_sgd"]);
    for i in 0..e.grid_points {
        let w = lo + step * i as f64;
        table.push(vec![num(w), num(params.density_rmsprop(w)), num(params.density_sgd(w))]);
    }
    let (delta, delta_note) = match params.delta_threshold() {
        Ok(d) => (Some(d), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let t = e.fair_threshold;
    let results = json!({
        "kappa": params.kappa(),
        "vartheta": params.vartheta(),
        "mean": params.mean(),
        "bias": (e.p0 - params.p1()).abs(),
        "delta": delta,
        "delta_note": delta_note,
        "ratio_at_fair_min": params.ratio_at_fair_min(),
        "fair_threshold": t,
        "fair_mass_rmsprop": params.mass(Optimizer::RmsProp, -t, t),
        "fair_mass_sgd": params.mass(Optimizer::Sgd, -t, t),
        "normalization_rmsprop": params.normalization(Optimizer::RmsProp),
        "normalization_sgd": params.normalization(Optimizer::Sgd),
        "grid": { "lo": lo, "hi": hi, "points": e.grid_points },
    });
    Ok((table, results))
}

fn theorems(e: &TheoremsExperiment, seed: u64, exec: Execution) -> Result<(Table, Value)> {
    e.spec.check()?;
    let ngos = validate_ngos(&e.spec);
    let t2 = check_theorem2(&e.spec, e.gamma, e.epsilon, e.steps, e.draws, seed, exec)?;
    let vs = check_variance_scaling(&e.spec, &e.variance_gammas, e.epsilon, e.draws, seed, exec)?;
    let t3 = if e.spec.dim() == 1 {
        let model = QuadraticSubgroups::new(e.spec.p0)?;
        Some(check_theorem3(&model, &e.spec, e.epsilon, e.gap_w, e.gap_eta, e.draws, seed)?)
    } else {
        None
    };

    let mut table = Table::new(&[
        "theorem",
        "check",
        "analytic_bound",
        "empirical_value",
        "satisfied",
        "sample_count",
    ]);
    let mut row = |theorem: &str, check: String, bound: f64, value: f64, ok: bool, n: usize| {
        table.push(vec![theorem.into(), check, num(bound), num(value), ok.to_string(), n.to_string()]);
    };
    for j in 0..t2.mc_mean.len() {
        let within = (t2.mc_mean[j] - t2.expected_at_steps[j]).abs() <= 3.0 * t2.mc_stderr[j];
        row("update_disparity", format!("v_mean[{j}]"), t2.expected_at_steps[j], t2.mc_mean[j], within, e.draws);
    }
    for (j, d) in t2.preconditioner.iter().enumerate() {
        row("update_disparity", format!("d_diag[{j}]"), 1.0, *d, *d <= 1.0, 0);
    }
    let c = &t2.contraction;
    row("update_disparity", "contraction".into(), c.analytic_bound, c.empirical_value, c.satisfied, c.sample_count);
    for i in 1..vs.gammas.len() {
        row(
            "variance_scaling",
            format!("ratio[{}/{}]", vs.gammas[i], vs.gammas[0]),
            vs.proportional_ratio[i],
            vs.observed_ratio[i],
            vs.within_factor_3[i],
            e.draws,
        );
    }
    if let Some(t3) = &t3 {
        let c = &t3.check;
        row("parity_gap", "first_order_bound".into(), c.analytic_bound, c.empirical_value, c.satisfied, c.sample_count);
        row("parity_gap", "strict_fraction".into(), 1.0, t3.strict_fraction, t3.strict_fraction == 1.0, t3.draws);
    }

    let results = json!({
        "ngos_well_behaved": ngos.all_passed(),
        "ngos_checks": ngos.checks,
        "update_disparity": t2,
        "variance_scaling": vs,
        "parity_gap": t3,
        "parity_gap_note": t3.is_none().then_some("skipped: the subgroup model is one-dimensional"),
    });
    Ok((table, results))
}

const TRAIN_COLUMNS: &[&str] = &[
    "optimizer",
    "seed",
    "accuracy",
    "f1",
    "f_eod",
    "f_eop",
    "f_dpa",
    "gap_eop",
    "gap_eod",
    "gap_dpa",
    "final_loss",
];

fn train_row(label: &str, r: &TrainRunResult) -> Vec<String> {
    let f = &r.fairness;
    vec![
        label.to_string(),
        r.seed.to_string(),
        num(r.test_accuracy),
        num(r.f1),
        num(f.f_eod),
        num(f.f_eop),
        num(f.f_dpa),
        num(f.gap_eop),
        num(f.gap_eod),
        num(f.gap_dpa),
        num(r.final_loss()),
    ]
}

fn test_json(t: &PairTest) -> Value {
    json!({
        "a": t.a,
        "b": t.b,
        "metric": t.metric.name(),
        "mean_a": t.mean_a,
        "mean_b": t.mean_b,
        "mean_abs_difference": t.mean_abs_difference,
        "p_value": t.p_value,
        "statistic": t.statistic,
    })
}

fn train(e: &TrainExperiment, seed: u64, exec: Execution) -> Result<(Table, Value)> {
    if e.optimizers.is_empty() || e.n_seeds == 0 {
        return Err(Error::param("optimizers/n_seeds", "need at least one of each"));
    }
    for o in &e.optimizers {
        o.validate()?;
    }
    let source = match &e.data {
        DataConfig::Synthetic(spec) => {
            spec.validate()?;
            DataSource::Synthetic(spec.clone())
        }
        DataConfig::Csv { path, schema } => {
            require_file(path)?;
            DataSource::Fixed(load_csv(path, schema)?)
        }
    };
    let seeds: Vec<u64> = (0..e.n_seeds as u64).map(|i| seed.wrapping_add(i)).collect();
    let labels = unique_labels(&e.optimizers);
    let (runs, tests) = if seeds.len() >= MIN_SEEDS && e.optimizers.len() >= 2 {
        let cmp = paired_comparison(&source, &e.optimizers, &seeds, &e.train, exec)?;
        (cmp.runs, cmp.tests)
    } else {
        (train_grid(&source, &e.optimizers, &seeds, &e.train, exec)?, Vec::new())
    };
    let mut table = Table::new(TRAIN_COLUMNS);
    for (label, per_seed) in labels.iter().zip(&runs) {
        for r in per_seed {
            table.push(train_row(label, r));
        }
    }
    let means: Vec<Value> = labels
        .iter()
        .zip(&runs)
        .map(|(label, per_seed)| {
            let mean = |f: &dyn Fn(&TrainRunResult) -> f64| per_seed.iter().map(f).sum::<f64>() / per_seed.len() as f64;
            let mut m = serde_json::Map::new();
            m.insert("optimizer".into(), json!(label));
            m.insert("accuracy".into(), json!(mean(&|r| r.test_accuracy)));
            m.insert("f1".into(), json!(mean(&|r| r.f1)));
            for metric in FairnessMetric::ALL {
                m.insert(metric.name().into(), json!(mean(&|r| metric.value(&r.fairness))));
            }
            Value::Object(m)
        })
        .collect();
    let note = if tests.is_empty() {
        Some(format!(
            "paired tests need at least {MIN_SEEDS} seeds and two optimizers"
        ))
    } else {
        None
    };
    let results = json!({
        "seeds": seeds,
        "means": means,
        "tests": tests.iter().map(test_json).collect::<Vec<_>>(),
        "tests_note": note,
    });
    Ok((table, results))
}

fn sweep(e: &SweepExperiment, seed: u64, exec: Execution) -> Result<(Table, Value)> {
    let seeds: Vec<u64> = (0..e.n_seeds as u64).map(|i| seed.wrapping_add(i)).collect();
    let r = imbalance_sweep(&e.template, &e.fractions, &e.optimizers, &seeds, &e.train, &e.metrics, exec)?;
    let mut table = Table::new(&["minority_fraction", "metric", "abs_difference", "p_value"]);
    for row in &r.rows {
        table.push(vec![
            num(row.minority_fraction),
            row.metric.name().into(),
            num(row.abs_difference),
            row.p_value.map_or_else(|| "n/a".into(), num),
        ]);
    }
    let rows: Vec<Value> = r
        .rows
        .iter()
        .map(|row| {
            json!({
                "minority_fraction": row.minority_fraction,
                "metric": row.metric.name(),
                "abs_difference": row.abs_difference,
                "mean_a": row.mean_a,
                "mean_b": row.mean_b,
                "p_value": row.p_value,
            })
        })
        .collect();
    Ok((table, json!({ "optimizers": r.labels, "seeds": seeds, "rows": rows })))
}

fn metrics(e: &MetricsExperiment) -> Result<(Table, Value)> {
    if e.input.as_os_str().is_empty() {
        return Err(Error::param("input", "no input file given"));
    }
    require_file(&e.input)?;
    let table_in = match e.format {
        LogFormat::PredictionLog => load_prediction_log(&e.input)?,
        LogFormat::CountTable => load_count_table(&e.input)?,
    };
    let report = evaluate(&table_in, &e.options)?;
    let mut table = Table::new(&["metric", "value"]);
    for metric in FairnessMetric::ALL {
        table.push(vec![metric.name().into(), num(metric.value(&report))]);
    }
    let results = json!({
        "groups": table_in.groups(),
        "classes": table_in.classes(),
        "total": table_in.total(),
        "report": report,
    });
    Ok((table, results))
}
