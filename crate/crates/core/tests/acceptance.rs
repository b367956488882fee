//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! `PASS`/`FAIL` line per criterion, then exits non-zero if any failed.
//!
//! Every tolerance and band below is pinned here; none is derived from the
//! quantity being checked.

use std::time::{Duration, Instant};

use fairopt_core::analytic::StationaryParams;
use fairopt_core::dynamics::{
    check_theorem2, check_theorem3, check_variance_scaling, first_order_bounds, run_warmup_with,
    simulate_trials, weak_approximation_gap,
};
use fairopt_core::experiment::{self, ExperimentConfig, RunConfig};
use fairopt_core::fairness::{evaluate, FairnessOptions, GroupedConfusion};
use fairopt_core::stats::{wilcoxon_signed_rank, SeededStream};
use fairopt_core::subgroup::{NgosSpec, QuadraticSubgroups};
use fairopt_core::trainer::{gradient_check, imbalance_sweep, FairnessMetric, LossKind, ModelKind, Network};
use fairopt_core::Execution;

const IFF_EQUALITY_MARGIN: f64 = 1e-9;
const IFF_RUNTIME: Duration = Duration::from_secs(1);
const WARMUP_RUNTIME: Duration = Duration::from_secs(30);
const SEVERE_RMS_BAND: (f64, f64) = (0.05, 0.20);
const SEVERE_SGD_MAX: f64 = 0.02;
const SEVERE_MIN_LEAD: f64 = 0.05;
const MILD_MAX_GAP: f64 = 0.10;
const LIMIT_TARGET: f64 = 2.0;
const LIMIT_SE: f64 = 3.0;
#[allow(clippy::approx_constant)]
const D_TARGET: f64 = 0.70711;
const D_TOL: f64 = 1e-5;
const DRAWS: usize = 10_000;
const WORKED_SGD_BOUND: f64 = 0.1;
const WORKED_RMS_BOUND: f64 = 0.070711;
const WORKED_TOL: f64 = 1e-12;
const VARIANCE_RATIO_BAND: (f64, f64) = (1.0 / 30.0, 1.0 / 3.33);
const GRAD_PROBES: usize = 100;
const GRAD_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_RUNTIME: Duration = Duration::from_secs(10);
const ORACLE_TABLES: usize = 1000;
const ORACLE_TOL: f64 = 1e-12;
const SWEEP_SEEDS: u64 = 10;
const SWEEP_RUNTIME: Duration = Duration::from_secs(300);
const WILCOXON_P: f64 = 2.0 / 1024.0;
const WILCOXON_TOL: f64 = 1e-15;
const WEAK_PATHS: usize = 10_000;
const WEAK_HORIZON: f64 = 10.0;
const WEAK_SUBSTEPS: usize = 20;

type Outcome = (bool, String);

fn iff_identity() -> Outcome {
    let start = Instant::now();
    let (mut checked, mut skipped, mut bad) = (0, 0, Vec::new());
    for k in 1..=9 {
        let p0 = 0.05 * k as f64;
        for eta in [0.01, 0.1, 0.2] {
            let p = StationaryParams::new(p0, eta).expect("valid parameters");
            let delta = p.delta_threshold().expect("biased grid point");
            let bias = (p0 - p.p1()).abs();
            let ratio = p.ratio_at_fair_min();
            if (bias - delta).abs() < IFF_EQUALITY_MARGIN || (ratio - 1.0).abs() < IFF_EQUALITY_MARGIN {
                skipped += 1;
                continue;
            }
            checked += 1;
            if (ratio > 1.0) != (bias > delta) {
                bad.push(format!("p0={p0} eta={eta}"));
            }
        }
    }
    let elapsed = start.elapsed();
    (
        bad.is_empty() && elapsed < IFF_RUNTIME,
        format!("{checked} points agree, {skipped} at equality, mismatches {bad:?}, {elapsed:?}"),
    )
}

fn warmup_fractions(preset: &str) -> (f64, f64, Duration) {
    let start = Instant::now();
    let cfg = RunConfig::from_preset(preset).expect("preset exists");
    let ExperimentConfig::Warmup(w) = &cfg.experiment else { unreachable!() };
    let curves: Vec<f64> = w
        .configs(cfg.master_seed)
        .expect("valid preset")
        .iter()
        .map(|c| run_warmup_with(c, Execution::Auto).expect("warm-up runs").final_fraction())
        .collect();
    (curves[0], curves[1], start.elapsed())
}

fn fig2_severe() -> Outcome {
    let (rms, sgd, elapsed) = warmup_fractions("fig2-severe");
    let ok = (SEVERE_RMS_BAND.0..=SEVERE_RMS_BAND.1).contains(&rms)
        && sgd <= SEVERE_SGD_MAX
        && rms - sgd >= SEVERE_MIN_LEAD
        && elapsed < WARMUP_RUNTIME;
    (ok, format!("rmsprop {rms:.3}, sgd {sgd:.3}, lead {:.3}, {elapsed:?}", rms - sgd))
}

fn fig2_mild() -> Outcome {
    let (rms, sgd, elapsed) = warmup_fractions("fig2-mild");
    let ok = rms >= sgd && (rms - sgd).abs() <= MILD_MAX_GAP && elapsed < WARMUP_RUNTIME;
    (ok, format!("rmsprop {rms:.3}, sgd {sgd:.3}, {elapsed:?}"))
}

fn threshold_nesting() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 1..=6 {
        let cfg = RunConfig::from_preset(&format!("appF-{k}")).expect("preset exists");
        let ExperimentConfig::Warmup(w) = &cfg.experiment else { unreachable!() };
        for c in w.configs(cfg.master_seed).expect("valid preset") {
            let trials = simulate_trials(&c, Execution::Auto).expect("trials run");
            let curves: Vec<Vec<f64>> = [0.1, 0.2, 0.4]
                .iter()
                .map(|&t| trials.curve(c.fair_center, t).fractions)
                .collect();
            for ((a, b), c) in curves[0].iter().zip(&curves[1]).zip(&curves[2]) {
                worst = worst.max(a - b).max(b - c);
                checked += 1;
            }
        }
    }
    (worst <= 0.0, format!("{checked} epoch checks, largest decrease {worst}"))
}

fn unit_spec() -> NgosSpec {
    NgosSpec::new(vec![1.0], vec![-1.0], vec![1.0], vec![1.0], 0.5).expect("valid spec")
}

fn second_moment_limit() -> Outcome {
    let r = check_theorem2(&unit_spec(), 0.9, 1e-8, 200, DRAWS, 5, Execution::Auto).expect("check runs");
    let (mean, se, d) = (r.mc_mean[0], r.mc_stderr[0], r.preconditioner[0]);
    let ok = (mean - LIMIT_TARGET).abs() <= LIMIT_SE * se && (d - D_TARGET).abs() <= D_TOL;
    (ok, format!("mean v {mean:.5} (se {se:.5}), D {d:.7}"))
}

fn random_spec(s: &mut SeededStream) -> NgosSpec {
    let dim = 1 + s.index(4);
    let mut v = |lo: f64, hi: f64| (0..dim).map(|_| lo + (hi - lo) * s.uniform()).collect::<Vec<_>>();
    let (mu_0, mu_1, theta_0, theta_1) = (v(-2.0, 2.0), v(-2.0, 2.0), v(0.5, 2.0), v(0.5, 2.0));
    let p0 = 0.05 + 0.9 * s.uniform();
    NgosSpec::new(mu_0, mu_1, theta_0, theta_1, p0).expect("valid spec")
}

fn contraction() -> Outcome {
    let mut s = SeededStream::new(606, 0);
    let (mut specs, mut draws, mut violations) = (0, 0, 0);
    while specs < 20 {
        let spec = random_spec(&mut s);
        if spec.preconditioner_diag(1e-8).iter().any(|&d| d > 1.0) {
            continue;
        }
        let r = check_theorem2(&spec, 0.9, 1e-8, 50, DRAWS, specs, Execution::Auto).expect("check runs");
        violations += r.norm_violations;
        draws += r.contraction.sample_count;
        specs += 1;
    }
    (violations == 0, format!("{specs} specs, {draws} draws, {violations} violations"))
}

fn strict_gap_bound() -> Outcome {
    let model = QuadraticSubgroups::new(0.3).expect("valid model");
    let spec = NgosSpec::new(vec![1.0], vec![-1.0], vec![1.0], vec![1.0], 0.3).expect("valid spec");
    let r = check_theorem3(&model, &spec, 1e-8, 0.5, 0.1, DRAWS, 9).expect("check runs");
    let worked = first_order_bounds(&[D_TARGET], &[-2.0], &[0.5], 0.1, 1.0).expect("bounds");
    let worked_ok = (worked.sgd_bound - WORKED_SGD_BOUND).abs() <= WORKED_TOL
        && (worked.rmsprop_bound - WORKED_RMS_BOUND).abs() <= WORKED_TOL;
    let all_d_below = r.preconditioner < 1.0;
    (
        all_d_below && r.strict_fraction == 1.0 && worked_ok,
        format!(
            "D {:.5}, strict on {:.4} of {} draws ({} zero-gradient), worked {} vs {}",
            r.preconditioner, r.strict_fraction, r.draws, r.zero_gradient_draws, worked.sgd_bound, worked.rmsprop_bound
        ),
    )
}

fn variance_scaling() -> Outcome {
    let r = check_variance_scaling(&unit_spec(), &[0.9, 0.99], 1e-8, DRAWS, 8, Execution::Auto).expect("check runs");
    let ratio = r.observed_ratio[1];
    let ok = (VARIANCE_RATIO_BAND.0..=VARIANCE_RATIO_BAND.1).contains(&ratio);
    (ok, format!("var ratio {ratio:.4} (proportional {:.4})", r.proportional_ratio[1]))
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut s = SeededStream::new(909, 0);
    let mut worst = 0.0f64;
    for kind in [ModelKind::Logistic, ModelKind::Mlp { hidden: 8 }] {
        for loss in [LossKind::CrossEntropy, LossKind::focal_default()] {
            let net = Network::new(kind, 4, 2).expect("valid network");
            for _ in 0..GRAD_PROBES {
                let params: Vec<f64> = (0..net.param_count()).map(|_| s.standard_normal()).collect();
                let xs: Vec<f64> = (0..8 * 4).map(|_| s.standard_normal()).collect();
                let ys: Vec<usize> = (0..8).map(|_| s.index(2)).collect();
                worst = worst.max(gradient_check(&net, &params, &loss, &xs, &ys, GRAD_H));
            }
        }
    }
    let elapsed = start.elapsed();
    (worst <= GRAD_TOL && elapsed < GRAD_RUNTIME, format!("max relative error {worst:.2e}, {elapsed:?}"))
}

/// Rates straight from the definitions, every ordered group pair, every class.
fn brute_force(t: &GroupedConfusion) -> [f64; 6] {
    let (gn, cn) = (t.groups().len(), t.classes().len());
    let cnt = |g: usize, a: usize, b: usize| t.count(g, a, b) as f64;
    let mut tpr = vec![vec![None; cn]; gn];
    let mut fpr = vec![vec![None; cn]; gn];
    let mut pr = vec![vec![0.0; cn]; gn];
    for g in 0..gn {
        let total = t.group_total(g) as f64;
        for c in 0..cn {
            let actual: f64 = (0..cn).map(|b| cnt(g, c, b)).sum();
            let predicted: f64 = (0..cn).map(|a| cnt(g, a, c)).sum();
            if actual > 0.0 {
                tpr[g][c] = Some(cnt(g, c, c) / actual);
            }
            if total - actual > 0.0 {
                fpr[g][c] = Some((predicted - cnt(g, c, c)) / (total - actual));
            }
            pr[g][c] = predicted / total;
        }
    }
    let ratio = |x: f64, y: f64| match (x == 0.0, y == 0.0) {
        (true, true) => Some(1.0),
        (_, true) => None,
        _ => Some(x / y),
    };
    let (mut eod, mut eop, mut dpa) = (1.0f64, 1.0f64, 1.0f64);
    let (mut geop, mut geod, mut gdpa) = (0.0f64, 0.0f64, 0.0f64);
    for a in 0..gn {
        for b in (0..gn).filter(|&b| b != a) {
            let (mut sa, mut sb) = (0.0, 0.0);
            for c in 0..cn {
                if let (Some(x), Some(y)) = (tpr[a][c], tpr[b][c]) {
                    eod = eod.min(ratio(x, y).unwrap_or(1.0));
                    sa += x;
                    sb += y;
                    geop = geop.max((x - y).abs());
                    geod = geod.max((x - y).abs());
                }
                if let (Some(x), Some(y)) = (fpr[a][c], fpr[b][c]) {
                    eod = eod.min(ratio(x, y).unwrap_or(1.0));
                    geod = geod.max((x - y).abs());
                }
                dpa = dpa.min(ratio(pr[a][c], pr[b][c]).unwrap_or(1.0));
                gdpa = gdpa.max((pr[a][c] - pr[b][c]).abs());
            }
            eop = eop.min(ratio(sa, sb).unwrap_or(1.0));
        }
    }
    [eod, eop, dpa, geop, geod, gdpa]
}

fn fairness_oracle() -> Outcome {
    let mut s = SeededStream::new(1010, 0);
    let mut worst = 0.0f64;
    for k in 0..ORACLE_TABLES {
        let (gn, cn) = [(2, 2), (3, 2), (2, 3), (3, 3)][k % 4];
        let mut t = GroupedConfusion::with_sizes(gn, cn).expect("valid table");
        for g in 0..gn {
            for a in 0..cn {
                for b in 0..cn {
                    t.add(g, a, b, s.index(16) as u64);
                }
            }
            t.add(g, s.index(cn), s.index(cn), 1);
        }
        let r = evaluate(&t, &FairnessOptions::default()).expect("metrics defined");
        let got = [r.f_eod, r.f_eop, r.f_dpa, r.gap_eop, r.gap_eod, r.gap_dpa];
        for (g, e) in got.iter().zip(brute_force(&t)) {
            worst = worst.max((g - e).abs());
        }
    }
    (worst <= ORACLE_TOL, format!("{ORACLE_TABLES} tables, max deviation {worst:.1e}"))
}

fn imbalance_trend() -> Outcome {
    let start = Instant::now();
    let cfg = RunConfig::from_preset("fig3-analog").expect("preset exists");
    let ExperimentConfig::Sweep(sw) = &cfg.experiment else { unreachable!() };
    let seeds: Vec<u64> = (0..SWEEP_SEEDS).map(|i| cfg.master_seed + i).collect();
    let r = imbalance_sweep(
        &sw.template,
        &[0.02, 0.22, 0.42],
        &sw.optimizers,
        &seeds,
        &sw.train,
        &[FairnessMetric::FDpa],
        Execution::Auto,
    )
    .expect("sweep runs");
    let (low, mid, high) = (&r.rows[0], &r.rows[1], &r.rows[2]);
    let elapsed = start.elapsed();
    let ok = low.abs_difference >= high.abs_difference && low.mean_a >= low.mean_b && elapsed < SWEEP_RUNTIME;
    (
        ok,
        format!(
            "|diff| at 0.02/0.22/0.42 = {:.4}/{:.4}/{:.4}; F_DPA at 0.02 rmsprop {:.4} vs sgd {:.4}; {elapsed:?}",
            low.abs_difference, mid.abs_difference, high.abs_difference, low.mean_a, low.mean_b
        ),
    )
}

fn wilcoxon_exact() -> Outcome {
    let a: Vec<f64> = (1..=10).map(f64::from).collect();
    let r = wilcoxon_signed_rank(&a, &[0.0; 10]).expect("test defined");
    ((r.p_value - WILCOXON_P).abs() <= WILCOXON_TOL && r.exact, format!("p = {} (exact: {})", r.p_value, r.exact))
}

fn weak_approximation() -> Outcome {
    let model = QuadraticSubgroups::new(0.1).expect("valid model");
    let gap = |eta| {
        let r = weak_approximation_gap(&model, eta, WEAK_HORIZON, 0.0, WEAK_PATHS, WEAK_SUBSTEPS, 13, Execution::Auto)
            .expect("gap estimate");
        r.mean_gap.iter().fold(0.0f64, |m, &g| m.max(g))
    };
    let (coarse, fine) = (gap(0.1), gap(0.05));
    (fine < coarse, format!("max |E W - E w| = {coarse:.5} at eta 0.1, {fine:.5} at eta 0.05"))
}

fn shrink(mut cfg: RunConfig) -> RunConfig {
    match &mut cfg.experiment {
        ExperimentConfig::Theorems(t) => t.draws = 2_000,
        ExperimentConfig::Train(t) => t.n_seeds = 5,
        _ => {}
    }
    cfg
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let log = dir.path().join("log.csv");
    std::fs::write(&log, "group,true_class,predicted_class\na,0,0\na,1,1\na,1,0\nb,0,1\nb,1,1\nb,0,0\n")
        .expect("write log");
    let mut metrics = RunConfig::default_for(experiment::Command::Metrics);
    if let ExperimentConfig::Metrics(m) = &mut metrics.experiment {
        m.input = log;
    }
    let configs = vec![
        RunConfig::from_preset("fig2-severe").expect("preset"),
        RunConfig::default_for(experiment::Command::Density),
        shrink(RunConfig::default_for(experiment::Command::Theorems)),
        shrink(RunConfig::from_preset("table2-analog").expect("preset")),
        RunConfig::from_preset("fig3-analog").expect("preset"),
        metrics,
    ];
    let mut differing = Vec::new();
    for cfg in &configs {
        let runs: Vec<Vec<u8>> = [1, 4, 4]
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let out = dir.path().join(format!("{}-{i}", cfg.command()));
                experiment::run(cfg, &out, Execution::from_workers(w)).expect("command runs");
                std::fs::read(out.join("results.csv")).expect("results written")
            })
            .collect();
        if runs.iter().any(|r| r != &runs[0]) {
            differing.push(cfg.command().name());
        }
    }
    (differing.is_empty(), format!("{} commands at workers 1/4/4, differing: {differing:?}", configs.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        ("bias-threshold iff identity", iff_identity),
        ("severe-bias warm-up", fig2_severe),
        ("mild-bias warm-up", fig2_mild),
        ("threshold nesting", threshold_nesting),
        ("second-moment limit and D", second_moment_limit),
        ("preconditioned contraction", contraction),
        ("strict parity-gap bound", strict_gap_bound),
        ("second-moment variance scaling", variance_scaling),
        ("gradient oracle", gradient_oracle),
        ("fairness metric oracle", fairness_oracle),
        ("imbalance sweep trend", imbalance_trend),
        ("Wilcoxon exactness", wilcoxon_exact),
        ("weak approximation", weak_approximation),
        ("byte determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} of {} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
