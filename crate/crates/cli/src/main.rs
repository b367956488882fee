//! `fairopt` command-line front end.
//!
//! Each command resolves a [`RunConfig`] from (in order) `--config`, a
//! `--preset`, or the command defaults, applies flag overrides, then writes
//! `config.json`, `results.csv` and `summary.json` into `--out`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairopt_core::dynamics::WarmupDynamics;
use fairopt_core::experiment::{self, Command, DataConfig, ExperimentConfig, LogFormat, RunConfig};
use fairopt_core::fairness::MissingClassPolicy;
use fairopt_core::trainer::CsvSchema;
use fairopt_core::{Error, Execution, Result};

#[derive(Debug, Parser)]
#[command(name = "fairopt", version, about = "Optimizer dynamics and group-fairness experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration (as written to `config.json` by a previous run).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset: fig2-severe, fig2-mild, appF-1..appF-6, fig3-analog,
    /// table2-analog.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Master seed; overrides the config or preset value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: runs/<preset or command>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads: 1 runs sequentially, 0 lets the pool decide.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Monte-Carlo warm-up: fraction of trials near the fair minimum per epoch.
    Warmup(WarmupArgs),
    /// Closed-form stationary densities of RMSProp and SGD.
    Density(DensityArgs),
    /// Update-disparity, variance-scaling and parity-gap checks.
    Theorems(TheoremsArgs),
    /// Train classifiers with several optimizers over paired seeds.
    Train(TrainArgs),
    /// Fairness difference between two optimizers across minority fractions.
    Sweep(SweepArgs),
    /// Fairness metrics of a prediction log, no training.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DynamicsArg {
    Discrete,
    Sde,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MissingArg {
    Exclude,
    Zero,
}

#[derive(Debug, Args)]
struct WarmupArgs {
    #[arg(long)]
    p0: Option<f64>,
    /// Learning rate applied to every optimizer.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    dynamics: Option<DynamicsArg>,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct TheoremsArgs {
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Number of paired seeds (master seed, master seed + 1, ...).
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Minority fraction of the synthetic dataset.
    #[arg(long)]
    minority_fraction: Option<f64>,
    /// Tabular CSV to train on instead of synthetic data.
    #[arg(long, requires_all = ["features", "label", "group"])]
    input: Option<PathBuf>,
    /// Comma-separated feature columns of `--input`.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    group: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated minority fractions.
    #[arg(long, value_delimiter = ',')]
    fractions: Vec<f64>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Prediction log `group,true_class,predicted_class`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Read `--input` as a count table with a trailing `count` column.
    #[arg(long)]
    counts: bool,
    /// Additive smoothing of every rate.
    #[arg(long)]
    smoothing: Option<f64>,
    #[arg(long, value_enum)]
    missing_class: Option<MissingArg>,
}

impl Cmd {
    fn command(&self) -> Command {
        match self {
            Cmd::Warmup(_) => Command::Warmup,
            Cmd::Density(_) => Command::Density,
            Cmd::Theorems(_) => Command::Theorems,
            Cmd::Train(_) => Command::Train,
            Cmd::Sweep(_) => Command::Sweep,
            Cmd::Metrics(_) => Command::Metrics,
        }
    }
}

fn base_config(global: &GlobalArgs, command: Command) -> Result<RunConfig> {
    let (cfg, origin) = if let Some(path) = &global.config {
        (RunConfig::load(path)?, format!("config {}", path.display()))
    } else if let Some(name) = &global.preset {
        (experiment::preset(name)?, format!("preset {name}"))
    } else {
        return Ok(RunConfig::default_for(command));
    };
    if cfg.command() != command {
        return Err(Error::InvalidInput(format!(
            "{origin} is for `{}`, not `{command}`",
            cfg.command()
        )));
    }
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_overrides(cfg: &mut RunConfig, cmd: Cmd) {
    match (&mut cfg.experiment, cmd) {
        (ExperimentConfig::Warmup(e), Cmd::Warmup(a)) => {
            set(&mut e.p0, a.p0);
            if let Some(eta) = a.eta {
                e.optimizers.iter_mut().for_each(|o| o.eta = eta);
            }
            set(&mut e.trials, a.trials);
            set(&mut e.epochs, a.epochs);
            set(&mut e.steps_per_epoch, a.steps_per_epoch);
            set(&mut e.fair_threshold, a.threshold);
            set(
                &mut e.dynamics,
                a.dynamics.map(|d| match d {
                    DynamicsArg::Discrete => WarmupDynamics::Discrete,
                    DynamicsArg::Sde => WarmupDynamics::Sde,
                }),
            );
        }
        (ExperimentConfig::Density(e), Cmd::Density(a)) => {
            set(&mut e.p0, a.p0);
            set(&mut e.eta, a.eta);
            set(&mut e.theta_global, a.theta);
            set(&mut e.grid_points, a.grid_points);
            if a.half_width.is_some() {
                e.grid_half_width = a.half_width;
            }
            set(&mut e.fair_threshold, a.threshold);
        }
        (ExperimentConfig::Theorems(e), Cmd::Theorems(a)) => {
            set(&mut e.draws, a.draws);
            set(&mut e.steps, a.steps);
            set(&mut e.gamma, a.gamma);
            set(&mut e.epsilon, a.epsilon);
        }
        (ExperimentConfig::Train(e), Cmd::Train(a)) => {
            set(&mut e.n_seeds, a.seeds);
            set(&mut e.train.epochs, a.epochs);
            if let (Some(f), DataConfig::Synthetic(spec)) = (a.minority_fraction, &mut e.data) {
                spec.minority_fraction = f;
            }
            if let (Some(path), Some(label), Some(group)) = (a.input, a.label, a.group) {
                e.data = DataConfig::Csv {
                    path,
                    schema: CsvSchema {
                        features: a.features,
                        label,
                        group,
                    },
                };
            }
        }
        (ExperimentConfig::Sweep(e), Cmd::Sweep(a)) => {
            set(&mut e.n_seeds, a.seeds);
            set(&mut e.train.epochs, a.epochs);
            if !a.fractions.is_empty() {
                e.fractions = a.fractions;
            }
        }
        (ExperimentConfig::Metrics(e), Cmd::Metrics(a)) => {
            set(&mut e.input, a.input);
            if a.counts {
                e.format = LogFormat::CountTable;
            }
            set(&mut e.options.smoothing, a.smoothing);
            set(
                &mut e.options.missing_class,
                a.missing_class.map(|m| match m {
                    MissingArg::Exclude => MissingClassPolicy::Exclude,
                    MissingArg::Zero => MissingClassPolicy::Zero,
                }),
            );
        }
        _ => unreachable!("base config matches the subcommand"),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let command = cli.command.command();
    let mut cfg = base_config(&cli.global, command)?;
    apply_overrides(&mut cfg, cli.command);
    if let Some(seed) = cli.global.seed {
        cfg.set_seed(seed);
    }
    let out = cli.global.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(cfg.preset.clone().unwrap_or_else(|| command.name().to_string()))
    });
    let exec = match cli.global.workers {
        0 => Execution::Auto,
        n => Execution::from_workers(n),
    };
    log::info!("running {command} into {}", out.display());
    let output = experiment::run(&cfg, &out, exec)?;
    for f in &output.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
