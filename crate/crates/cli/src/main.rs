use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wpl::hyperparam::GridSpec;
use wpl::simulation::SimSetting;
use wpl_cli::commands::{run_eval, run_fit, run_manifest, run_simulate};
use wpl_cli::config::{EvalConfig, FitConfig, SimulateConfig};
use wpl_cli::io::read_structured;
use wpl_cli::{CliError, Result};

const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "wpl", version, about = "Covariate-dependent graph estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate one graph per individual.
    Fit(FitArgs),
    /// Generate synthetic datasets with known graphs.
    Simulate(SimulateArgs),
    /// Score estimates against simulated truths.
    Eval(EvalArgs),
    /// Repeat the run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Headerless CSV, one row per individual.
    #[arg(long)]
    data: PathBuf,
    /// Headerless CSV of covariates; without it every weight is one.
    #[arg(long)]
    covariates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Fixed kernel bandwidth instead of the adaptive one.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    covariate_free: bool,
    /// Empirical-Bayes residual variance, for p close to or above n.
    #[arg(long)]
    high_dim: bool,
    /// Hyperparameter grid as JSON or TOML.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated 0-based individuals to estimate.
    #[arg(long, value_delimiter = ',')]
    anchors: Option<Vec<usize>>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Fit on the raw column scales.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Setting name; see the error message of an unknown name for the list.
    #[arg(long, required_unless_present = "setting_file")]
    setting: Option<String>,
    /// Full setting description as JSON or TOML.
    #[arg(long, conflicts_with = "setting")]
    setting_file: Option<PathBuf>,
    /// Number of sampled variables for a named setting.
    #[arg(long, default_value_t = 11)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimates: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn fit_config(a: FitArgs) -> Result<FitConfig> {
    let mut c = FitConfig::new(a.data, a.covariates, a.out);
    c.threshold = a.threshold;
    c.tau = a.tau;
    c.covariate_free = a.covariate_free;
    c.high_dim = a.high_dim;
    if let Some(path) = a.grid {
        c.grid = read_structured::<GridSpec>(&path)?;
    }
    c.threads = a.threads;
    c.seed = a.seed;
    c.anchors = a.anchors;
    if let Some(m) = a.max_sweeps {
        c.max_sweeps = m;
    }
    if let Some(t) = a.tol {
        c.tol = t;
    }
    c.standardize = !a.no_standardize;
    Ok(c)
}

fn simulate_config(a: SimulateArgs) -> Result<SimulateConfig> {
    let setting = match (a.setting, a.setting_file) {
        (_, Some(path)) => read_structured::<SimSetting>(&path)?,
        (Some(kind), None) => SimSetting::preset(&kind, a.dim).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, None) => return Err(CliError::Usage("--setting or --setting-file is required".into())),
    };
    Ok(SimulateConfig {
        setting,
        trials: a.trials,
        seed: a.seed,
        out: a.out,
    })
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Fit(a) => run_fit(&fit_config(a)?),
        Command::Simulate(a) => run_simulate(&simulate_config(a)?),
        Command::Eval(a) => run_eval(&EvalConfig {
            truth: a.truth,
            estimates: a.estimates,
            out: a.out,
        }),
        Command::Rerun { manifest } => run_manifest(&manifest),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(EXIT_USAGE),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
