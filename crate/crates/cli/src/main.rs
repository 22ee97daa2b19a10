//! `ris-sim`: Monte Carlo sweeps, closed-form bound tables, panel
//! dimensioning and self-validation for a RIS-assisted multi-user downlink.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_core::planner::PlanMethod;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, unparsable or inconsistent configuration (exit 2).
    #[error("{0}")]
    Config(String),
    /// Failure while computing (exit 3).
    #[error("{0}")]
    Runtime(String),
    /// At least one built-in check failed (exit 1).
    #[error("validation failed")]
    ChecksFailed,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ris-sim",
    version,
    about = "Simulator and dimensioning tool for RIS-assisted multi-user downlinks"
)]
struct Cli {
    /// Worker threads for the parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo capacity and rate sweep over the configured element grid (CSV).
    Simulate(SimulateArgs),
    /// Closed-form per-user gain and bound table, no Monte Carlo (CSV).
    Bounds(ConfigArgs),
    /// Minimum element count reaching a target rate-to-capacity ratio (CSV).
    Plan(PlanArgs),
    /// Ratio-floor columns over the element grid, one per antenna load (CSV).
    SweepRatio(SweepRatioArgs),
    /// Built-in checks reported as measured/expected/tolerance lines.
    Validate,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Override the configured trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Override the configured root seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Target rate-to-capacity ratio, in (0, 1).
    #[arg(long)]
    eta: f64,
    /// `search` walks the exact ratio floor (authoritative); `closed-form`
    /// extrapolates from the configured panel's per-element gains.
    #[arg(long, value_enum, default_value = "search")]
    method: MethodArg,
}

#[derive(Args)]
struct SweepRatioArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Comma-separated antenna-to-user ratios, e.g. 1,5,10,20.
    #[arg(long = "mu-list", value_delimiter = ',', default_value = "1,5,10,20")]
    mu_list: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Search,
    ClosedForm,
}

impl From<MethodArg> for PlanMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Search => PlanMethod::Search,
            MethodArg::ClosedForm => PlanMethod::ClosedForm,
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => {
            let cfg = config::load(&args.common.config)?;
            commands::simulate(&cfg, args.trials, args.seed, args.common.out.as_deref())
        }
        Command::Bounds(args) => {
            let cfg = config::load(&args.config)?;
            commands::bounds(&cfg, args.out.as_deref())
        }
        Command::Plan(args) => {
            let cfg = config::load(&args.common.config)?;
            commands::plan(&cfg, args.eta, args.method.into(), args.common.out.as_deref())
        }
        Command::SweepRatio(args) => {
            let cfg = config::load(&args.common.config)?;
            commands::sweep_ratio(&cfg, &args.mu_list, args.common.out.as_deref())
        }
        Command::Validate => commands::validate(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
