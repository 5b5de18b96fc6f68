//! Command-line scenario runner.
//!
//! ```text
//! kerrsim run <config.toml> [--table.key=value ...]
//! kerrsim timescales <config.toml> [--table.key=value ...]
//! ```
//!
//! Exit status: 0 on success, 2 for config errors, 3 when the Fock cutoffs
//! cannot meet the tolerance, 4 when `pde-check` exceeds its tolerance.

pub mod config;
pub mod report;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ConfigError, LoadedConfig, Scenario, ScenarioConfig};
pub use report::{ComparisonReport, Trajectory, CSV_HEADER};
pub use run::{execute, CliError, RunOutput};

#[derive(Debug, Parser)]
#[command(name = "kerrsim", version, about = "Open Kerr oscillator scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario named in a config file and write CSV/JSON output.
    Run {
        config: PathBuf,
        /// Config overrides, `--table.key=value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Print the Ehrenfest, revival and bath recurrence times.
    Timescales {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

/// Parse `args` and run; returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run { config, overrides } => run::load(&config, &overrides).and_then(|cfg| run::run(&cfg).map(|_| ())),
        Command::Timescales { config, overrides } => run::load(&config, &overrides)
            .and_then(|cfg| run::timescale_table(&cfg))
            .map(|table| print!("{table}")),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kerrsim: {e}");
            e.exit_code()
        }
    }
}
