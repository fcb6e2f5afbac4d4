mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use degen_core::Error;

use crate::config::{Cli, Command};

/// Exit status for an error. Verdicts never reach this path.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidCell(_)
            | Error::InvalidParameter(_)
            | Error::InvalidInput(_)
            | Error::SelfIntersectingFold { .. }
            | Error::UnsupportedInput(_)
            | Error::UnsupportedPolicy(_)
            | Error::IncomparableFingerprints(_)
            | Error::DegenerateParameters(_)
            | Error::UnsupportedSize { .. }
            | Error::Parse { .. }
            | Error::UnsupportedLattice(_),
        ) => 2,
        Some(Error::CertificationFailed(_)) => 3,
        Some(Error::SamplingFailure { .. }) => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => config::load(path)?,
        None => Default::default(),
    };
    if let Some(n) = config::resolve_threads(cli.threads, file.threads)? {
        if n == 0 {
            return Err(Error::InvalidInput("thread count must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Generate(a) => commands::generate(a.merge(file.generate.unwrap_or_default()), argv),
        Command::WlTest(a) => commands::wl_test(a.merge(file.wl_test.unwrap_or_default()), argv),
        Command::Sample(a) => commands::sample(a.merge(file.sample.unwrap_or_default()), argv),
        Command::Appendixb(a) => commands::appendixb(a.merge(file.appendixb.unwrap_or_default()), argv),
        Command::Floor(a) => commands::floor(a.merge(file.floor.unwrap_or_default()), argv),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
