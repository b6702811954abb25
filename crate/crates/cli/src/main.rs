use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod output;
mod settings;

use settings::Settings;

/// Throughput analysis of joint channel and network coding in star networks.
#[derive(Parser)]
#[command(name = "starnc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected RLNC decoding overhead: exact value, m-independent bounds and a simulated mean
    Overhead(Settings),
    /// Optimum number of blocks and code rate for a phase and scheme
    Optimize(Settings),
    /// TDMA over RLNC bit ratio at each scheme's optimum, with crossings of 1 when sweeping K
    Ratio(Settings),
    /// Monte Carlo simulation of the star protocol compared with the analytic slot counts
    Simulate(Settings),
}

/// Invalid command-line or configuration input.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Simulated and analytic slot counts disagree somewhere.
#[derive(Debug)]
pub struct ValidationFailed {
    pub flagged: usize,
    pub total: usize,
}

impl fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of {} points exceed |z| = {}", self.flagged, self.total, starnc::netsim::Z_THRESHOLD)
    }
}

impl std::error::Error for ValidationFailed {}

const EXIT_USAGE: u8 = 1;
const EXIT_MODEL_DOMAIN: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ValidationFailed>() {
            return EXIT_VALIDATION;
        }
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<starnc::Error>() {
            return match e {
                starnc::Error::Config(_) | starnc::Error::Dimension(_) => EXIT_USAGE,
                _ => EXIT_MODEL_DOMAIN,
            };
        }
    }
    EXIT_USAGE
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Overhead(s) => commands::overhead(&s.resolve()?),
        Command::Optimize(s) => commands::optimize_cmd(&s.resolve()?),
        Command::Ratio(s) => commands::ratio(&s.resolve()?),
        Command::Simulate(s) => commands::simulate(&s.resolve()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
