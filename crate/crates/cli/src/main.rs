//! `sgt-lab`: exact and perturbed shortest-path tables, fitted values, policy
//! gradient and behavioural cloning experiments from one entry point.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};

use commands::{BcFlags, ExactFlags, FittedFlags, PerturbFlags, PgFlags, ReportFlags};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    BadConfig(String),
    #[error("missing required setting --{0}")]
    Missing(String),
    #[error("no result rows to summarize")]
    EmptyResults,
    #[error("{0}")]
    Bound(String),
    #[error("{0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Bound(_) | CliError::NonFinite(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sgt-lab", version, about = "Sub-goal tree shortest paths and learning experiments")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "SGT_LAB_THREADS")]
    threads: Option<usize>,
    /// JSON object of settings; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact all-pairs tables and a greedy trajectory on a graph file.
    Exact(ExactFlags),
    /// Value-noise bound checks and adversarial Bellman instances.
    Perturb(PerturbFlags),
    /// Fitted sub-goal values against fitted Q on a 2D world.
    Fitted(FittedFlags),
    /// Policy-gradient training of sub-goal predictors.
    Pg(PgFlags),
    /// Behavioural cloning from lattice shortest-path demonstrations.
    Bc(BcFlags),
    /// Mean and half-range over seeds of appended result rows.
    Report(ReportFlags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Exact(_) => "exact",
            Command::Perturb(_) => "perturb",
            Command::Fitted(_) => "fitted",
            Command::Pg(_) => "pg",
            Command::Bc(_) => "bc",
            Command::Report(_) => "report",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::BadConfig("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::BadConfig(e.to_string()))?;
    }
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Exact(f) => commands::exact(file, f),
        Command::Perturb(f) => commands::perturb(file, f),
        Command::Fitted(f) => commands::fitted(file, f),
        Command::Pg(f) => commands::pg(file, f),
        Command::Bc(f) => commands::bc(file, f),
        Command::Report(f) => commands::report(file, f),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let sub = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Missing(_)) {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(s) = cmd.find_subcommand_mut(sub) {
                    eprintln!("\n{}", s.render_usage());
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::BadConfig("x".into()).exit_code(), 1);
        assert_eq!(CliError::Missing("graph".into()).exit_code(), 1);
        assert_eq!(CliError::EmptyResults.exit_code(), 1);
        assert_eq!(CliError::Bound("x".into()).exit_code(), 2);
        assert_eq!(CliError::NonFinite("x".into()).exit_code(), 2);
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
