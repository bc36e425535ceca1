mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Suite, SweepRun};

/// Experiments with the relativistic heat equation.
#[derive(Parser)]
#[command(name = "relheat", version, about)]
struct Cli {
    /// TOML experiment config; every key has a default.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set c=2` or `--set bc.value=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set output_dir=DIR`.
    #[arg(long, short = 'o', global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-dependent run (relativistic, heat or telegraph).
    Evolve,
    /// Stationary solve in w = log u with Dirichlet data.
    Stationary,
    /// Run the check scorecard.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Repeat an experiment over values of one config key.
    Sweep {
        /// Config key to vary (same syntax as `--set`).
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<String>,
        #[arg(long, value_enum, default_value = "evolve")]
        run: SweepRun,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("solver did not converge: {0}")]
    Solver(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }

    /// Classifies a core error raised by a run.
    pub fn from_run(e: relheat::Error) -> Self {
        use relheat::Error as E;
        match e {
            E::NewtonDiverged { .. } | E::BlowUp { .. } | E::Bracket { .. } | E::Singular(_) => CliError::Solver(e.to_string()),
            other => config::core_config_error(other),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.overrides;
    if let Some(dir) = &cli.output_dir {
        overrides.push(format!("output_dir={}", toml::Value::String(dir.to_string_lossy().into_owned())));
    }
    let table = config::load_table(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Evolve => commands::cmd_evolve(&config::from_table(table)?),
        Command::Stationary => commands::cmd_stationary(&config::from_table(table)?),
        Command::Verify { suite } => commands::cmd_verify(suite, &config::from_table(table)?),
        Command::Sweep { axis, values, run } => commands::cmd_sweep(&table, &axis, &values, run),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relheat: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
