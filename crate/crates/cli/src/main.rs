//! `nkfeedback` command-line front end: evolutions, trajectory ensembles,
//! QFI scans and the efficiency-bound curves, all written as CSV.

mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use config::{Defaults, Grid, Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or output path (exit 1).
    Config(String),
    /// The computation itself failed (exit 2).
    Numerical(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Config(format!("cannot write {}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
        }
    }
}

impl From<nkfeedback::Error> for CliError {
    fn from(e: nkfeedback::Error) -> Self {
        if e.is_numerical() {
            Self::Numerical(e.to_string())
        } else {
            Self::Config(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "invalid configuration: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nkfeedback", version, about = "No-knowledge feedback qubit simulations and efficiency bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the feedback master equation from |+⟩
    Evolve(Overrides),
    /// Simulate conditioned trajectories and their ensemble mean
    Trajectories(Overrides),
    /// Exact and approximate per-probe efficiency bounds over an η grid
    Fig2(Overrides),
    /// Simultaneous vs independent (ω, η) bounds over an η grid
    Fig3(Overrides),
    /// Efficiency QFI from three independent formulas over parameter grids
    QfiScan(Overrides),
}

fn run(command: Command) -> Result<(), CliError> {
    let defaults = |out: &'static str, grid_eta: Grid| Defaults { dt: 1e-3, grid_eta, out };
    match command {
        Command::Evolve(o) => commands::evolve(&RunConfig::build(o, defaults("evolve.csv", Grid::new(0.1, 0.9, 9)))?),
        Command::Trajectories(o) => commands::trajectories(&RunConfig::build(
            o,
            defaults("trajectories.csv", Grid::new(0.1, 0.9, 9)),
        )?),
        Command::Fig2(o) => commands::fig2(&RunConfig::build(o, defaults("fig2.csv", Grid::new(0.05, 0.95, 19)))?),
        Command::Fig3(o) => commands::fig3(&RunConfig::build(o, defaults("fig3.csv", Grid::new(0.1, 0.9, 9)))?),
        Command::QfiScan(o) => {
            commands::qfi_scan(&RunConfig::build(o, defaults("qfi_scan.csv", Grid::new(0.1, 0.9, 5)))?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nkfeedback: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
