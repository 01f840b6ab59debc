use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hgo_gp_cli::{cmd_plot, cmd_run, cmd_verify, CliError, VerifySettings};

/// Environment variable holding the log filter, e.g. `info` or `hgo_gp_cli=debug`.
const LOG_ENV: &str = "HGO_GP_LOG";

#[derive(Parser)]
#[command(name = "hgo-gp", version, about = "Observer-fed GP estimation of Lie derivatives: simulate, plot, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the obstacle scenario once per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds, e.g. `0,1,2`.
        #[arg(long = "seed", value_delimiter = ',', required = true, num_args = 1..)]
        seeds: Vec<u64>,
    },
    /// Draw the trajectory, estimate and error figures of a trace.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance checks and print a pass/fail table.
    Verify {
        /// Skip the slow envelope-coverage check.
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true, value_delimiter = ',', allow_hyphen_values = true)]
        observer_gains: Option<Vec<f64>>,
        #[arg(long, hide = true)]
        oracle_tolerance: Option<f64>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seeds } => cmd_run(&config, &out, &seeds),
        Command::Plot { trace, out } => cmd_plot(&trace, &out).map(|_| ()),
        Command::Verify {
            quick,
            observer_gains,
            oracle_tolerance,
        } => {
            let defaults = VerifySettings::default();
            let settings = VerifySettings {
                quick,
                observer_gains: observer_gains.unwrap_or(defaults.observer_gains),
                oracle_tolerance: oracle_tolerance.unwrap_or(defaults.oracle_tolerance),
            };
            cmd_verify(&settings).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status.code() as u8)
        }
    }
}
