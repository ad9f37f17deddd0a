//! `svadi`: price European puts under stochastic volatility with an ADI
//! scheme on full and sparse grids, and run the convergence study.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RawConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "svadi", version, about)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full-grid solve at level n.
    Solve(SolveArgs),
    /// Combination-technique solve at level n.
    Sparse(SolveArgs),
    /// Build or find the cached reference solution.
    Reference,
    /// Convergence and run-time study against the reference.
    Study(StudyArgs),
    /// Manufactured-solution and property checks.
    Check,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(short = 'n', long)]
    level: Option<u32>,
    #[arg(long)]
    spot: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Price surface CSV.
    #[arg(long)]
    surface: Option<PathBuf>,
    /// Binary dump of the dimensionless solution.
    #[arg(long)]
    field: Option<PathBuf>,
    /// Per-step trace CSV (full grid only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Combination plan CSV (sparse only).
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Compact operator rows CSV.
    #[arg(long)]
    rows: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    convergence: Option<PathBuf>,
    #[arg(long)]
    runtime: Option<PathBuf>,
}

fn set_opt(raw: &mut RawConfig, key: &str, value: Option<String>) -> Result<(), CliError> {
    if let Some(v) = value {
        raw.set(key, &v)?;
    }
    Ok(())
}

fn path_str(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            RawConfig::parse(&text, &path.display().to_string())?
        }
        None => RawConfig::default(),
    };
    for pair in &cli.set {
        raw.set_pair(pair)?;
    }
    set_opt(&mut raw, "threads", cli.threads.map(|t| t.to_string()))?;
    match &cli.command {
        Command::Solve(a) | Command::Sparse(a) => {
            set_opt(&mut raw, "level", a.level.map(|v| v.to_string()))?;
            set_opt(&mut raw, "spot", a.spot.map(|v| v.to_string()))?;
            set_opt(&mut raw, "sigma", a.sigma.map(|v| v.to_string()))?;
            set_opt(&mut raw, "surface_csv", path_str(a.surface.clone()))?;
            set_opt(&mut raw, "field_bin", path_str(a.field.clone()))?;
            set_opt(&mut raw, "trace_csv", path_str(a.trace.clone()))?;
            set_opt(&mut raw, "plan_csv", path_str(a.plan.clone()))?;
            set_opt(&mut raw, "rows_csv", path_str(a.rows.clone()))?;
        }
        Command::Study(a) => {
            set_opt(&mut raw, "convergence_csv", path_str(a.convergence.clone()))?;
            set_opt(&mut raw, "runtime_csv", path_str(a.runtime.clone()))?;
        }
        Command::Reference | Command::Check => {}
    }
    let config = raw.resolve()?;
    if let Some(t) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
    }
    match cli.command {
        Command::Solve(_) => commands::solve(&config),
        Command::Sparse(_) => commands::sparse(&config),
        Command::Reference => commands::build_reference(&config),
        Command::Study(_) => commands::study(&config),
        Command::Check => commands::check(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("svadi: {e}");
            ExitCode::FAILURE
        }
    }
}
