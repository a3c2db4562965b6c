//! `flatmagic` command-line runner.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use flatmagic::Error;

use args::Cli;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::InvalidDimension(_) => 2,
        Error::ResourceLimit(_) => 3,
        Error::SamplingFailure(_) => 4,
        Error::Io(_) | Error::Json(_) => 1,
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let common = cli.command.common();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?;
    let out = pool.install(|| commands::run(&cli.command))?;
    match &common.out {
        Some(path) => {
            std::fs::write(path, &out.report)?;
            print!("{}", out.summary);
            println!("  report written to {}", path.display());
        }
        None => {
            eprint!("{}", out.summary);
            std::io::stdout().write_all(out.report.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flatmagic {}: {e}", cli.command.name());
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidInput(String::new())), 2);
        assert_eq!(exit_code(&Error::InvalidDimension(String::new())), 2);
        assert_eq!(exit_code(&Error::ResourceLimit(String::new())), 3);
        assert_eq!(exit_code(&Error::SamplingFailure(String::new())), 4);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 1);
    }
}
