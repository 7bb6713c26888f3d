//! `cantor-ft`: builds schedules, evaluates the sign function and its transform,
//! and runs the numerical checks, writing JSON and CSV reports.
//!
//! Exit codes: 0 when every check is verified, 1 when any is violated, 2 when
//! some are inconclusive (or a computation fails), 64 for usage and input errors.

mod commands;
mod config;
mod report;

use std::ffi::OsString;

use cantor_ft::Verdict;
use clap::Parser;
use thiserror::Error;

use config::{Command, GlobalArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Compute(String),
    #[error("output: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 64,
            CliError::Compute(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cantor-ft", version, about = "Cantor-set sign functions and their Fourier transforms")]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Verified => 0,
        Verdict::Violated => 1,
        Verdict::Inconclusive => 2,
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let config = cli.globals.resolve(cli.command)?;
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("threads: {e}")))?;
    }
    let (spec, report) = commands::execute(&config)?;
    let name = config.command.as_ref().map_or("run", Command::name);
    let written = report::emit_report(&report, &config, &spec, name)?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    eprintln!("{name}: {}", report.summary);
    Ok(exit_code(report.verdict))
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}
