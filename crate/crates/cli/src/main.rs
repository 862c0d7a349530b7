//! `hip`: simulate, fit, predict, evaluate and bootstrap from the command line.
//!
//! Every subcommand accepts `--config FILE` with `key = value` lines using
//! the long flag names; flags given on the command line win.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::List;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "hip", version, about = "Sparse multi-view integration across subgroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Key-value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (falls back to HIP_WORKERS, then the CPU count).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic train/test bundles with ground truth.
    Simulate(SimulateArgs),
    /// Fit a model, optionally choosing K and the penalties.
    Fit(FitArgs),
    /// Predict outcomes for a dataset from a saved model.
    Predict(PredictArgs),
    /// Score selection against the truth and prediction on test data.
    Evaluate(EvaluateArgs),
    /// Bootstrap stability selection.
    Bootstrap(BootstrapArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// full | partial
    #[arg(long)]
    pub scenario: Option<String>,
    /// p1 | p2 | p3 | custom
    #[arg(long)]
    pub setting: Option<String>,
    /// View sizes for `--setting custom`, e.g. 40,50.
    #[arg(long)]
    pub p: Option<List<usize>>,
    /// Subgroup sizes.
    #[arg(long)]
    pub n: Option<List<usize>>,
    /// continuous | multiclass
    #[arg(long)]
    pub outcome: Option<String>,
    /// argmax | sample
    #[arg(long)]
    pub label_rule: Option<String>,
    #[arg(long)]
    pub k_true: Option<usize>,
    #[arg(long)]
    pub n_signal: Option<usize>,
    #[arg(long)]
    pub sigma_x: Option<f64>,
    #[arg(long)]
    pub sigma_y: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Penalty, tuning and solver flags shared by `fit` and `bootstrap`.
#[derive(Args, Debug, Clone)]
pub struct TuneArgs {
    /// random | grid | none
    #[arg(long)]
    pub tune: Option<String>,
    #[arg(long)]
    pub lambda_g: Option<f64>,
    #[arg(long)]
    pub lambda_xi: Option<f64>,
    /// Grid points per lambda axis.
    #[arg(long)]
    pub grid_steps: Option<usize>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Share of the full grid tried by `--tune random`.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Standardize view columns within each subgroup before fitting.
    #[arg(long)]
    pub standardize_x: Option<bool>,
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    #[arg(long)]
    pub eps_outer: Option<f64>,
    #[arg(long)]
    pub max_inner_iters: Option<usize>,
    #[arg(long)]
    pub eps_inner: Option<f64>,
    /// Prediction ridge as a multiple of `trace(B^T B) / K`.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Number of components, or `auto`.
    #[arg(long)]
    pub k: Option<String>,
    /// simple | algorithmic
    #[arg(long)]
    pub k_method: Option<String>,
    /// Relative eigenvalue drop that stops the K search.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// singular | squared
    #[arg(long)]
    pub eigen: Option<String>,
    /// Use the unstandardized data for the K search.
    #[arg(long)]
    pub raw_scree: Option<bool>,
    /// Exit 0 even when the final fit did not converge.
    #[arg(long)]
    pub allow_nonconvergence: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Test data.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Truth CSV written by `simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Selection CSV to score instead of the model's own support.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Label written in the `replicate` column.
    #[arg(long)]
    pub replicate: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub tune: TuneArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// One fraction for every view, or one per view.
    #[arg(long)]
    pub top_fraction: Option<List<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Bootstrap(a) => commands::bootstrap(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
