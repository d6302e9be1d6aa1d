//! `wmr`: trajectory-tracking toolkit front end.
//!
//! One self-describing TOML configuration drives every subcommand; flags
//! exist only for the config path, the output directory, and verbosity.
//!
//! Exit codes: 0 success, 2 configuration error, 3 degenerate zoning,
//! 4 infeasible LMI, 5 simulation divergence, 6 uncertainty range too wide,
//! 1 other failures.

mod artifacts;
mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::{cmd_compare, cmd_path, cmd_simulate, cmd_synth, exit_code, CliError};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "wmr",
    version,
    about = "Trajectory tracking for a differential-drive robot",
    after_help = "Exit codes: 0 ok, 2 config error, 3 degenerate zoning, \
                  4 infeasible LMI, 5 divergence, 6 uncertainty too wide, 1 other."
)]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `output.dir`).
    #[arg(short, long, global = true)]
    out_dir: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the reference trajectory CSV and print path extrema.
    Path,
    /// Synthesize fuzzy gains; write the synthesis file, pole set, and
    /// verification report.
    Synth,
    /// Run one closed-loop simulation; write trace and metrics CSVs.
    Simulate,
    /// Run classic, type1, and type2 on the shared scenario; write a
    /// comparison table.
    Compare,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?,
        None => String::new(),
    };
    Ok(RunConfig::parse(&text)?)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let out_dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir));
    match cli.command {
        Command::Path => cmd_path(&config, &out_dir),
        Command::Synth => cmd_synth(&config, &out_dir),
        Command::Simulate => cmd_simulate(&config, &out_dir),
        Command::Compare => cmd_compare(&config, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
