//! `evograph`: simulate the evolving multigraph, tabulate its limiting
//! degree sequence and compare the two.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CompareOpts, Failure, SimulateOpts, SpecialOpts, SweepOpts};
use config::{Env, RunArgs};

#[derive(Debug, Parser)]
#[command(name = "evograph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run independent trials and write mean degree histograms
    Simulate(SimulateOpts),
    /// Build the limiting degree sequence and its constants
    Theory,
    /// Tabulate the special function behind the theory curve
    Special(SpecialOpts),
    /// Simulate and compare against the theory curve
    Compare(CompareOpts),
    /// Compare over a grid of alpha1 values
    Sweep(SweepOpts),
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let mut args = cli.run.clone();
    // The grid replaces alpha1, so a sweep does not need one.
    if matches!(cli.command, Command::Sweep(_)) && args.alpha1.is_none() {
        args.alpha1 = args.alpha.clone();
    }
    let cfg = commands::resolve(&args, &Env::from_process())?;
    match &cli.command {
        Command::Simulate(o) => commands::simulate(&cfg, o),
        Command::Theory => commands::theory(&cfg),
        Command::Special(o) => commands::special(&cfg, o),
        Command::Compare(o) => commands::compare_cmd(&cfg, o),
        Command::Sweep(o) => commands::sweep(&cfg, o),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evograph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
