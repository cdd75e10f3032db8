//! `ospkit`: solve, simulate and cross-check observer selection from the command line.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ospkit::sim::Policy;
use std::path::PathBuf;

/// Exit status for each failure class.
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NUMERIC: u8 = 2;
pub const EXIT_MISMATCH: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "ospkit", version, about = "Deadline-aware observer selection for multirate Kalman estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one cycle and print the chosen sequence, d and MSE.
    Schedule {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<Policy>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a full simulation and write the per-cycle CSV log.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<Policy>,
        #[arg(long)]
        cycles: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV destination; standard output when neither this nor the config names one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Independent runs with consecutive seeds, concatenated in seed order.
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Check branch-and-bound against exhaustive enumeration, cycle by cycle.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cycles: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Print the first observation timestamp of each observer per cycle.
    Timestamps {
        #[arg(long, conflicts_with_all = ["period", "obs_periods"])]
        config: Option<PathBuf>,
        /// Decision period, when no config is given.
        #[arg(long, requires = "obs_periods")]
        period: Option<f64>,
        /// Comma-separated observer periods, when no config is given.
        #[arg(long, value_delimiter = ',', requires = "period")]
        obs_periods: Option<Vec<f64>>,
        #[arg(long, default_value_t = 10)]
        cycles: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a named scenario configuration.
    Preset {
        /// Scenario name; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse().map_err(|e: ospkit::OspError| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OSPKIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERIC })
        }
    }
}
