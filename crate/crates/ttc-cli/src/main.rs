//! `ttc` binary: parse the command line, cap the worker pool, dispatch,
//! and report failures as single-line `ttc: error[<code>]: <message>`
//! diagnostics with a nonzero exit status.

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use ttc_cli::{init_workers, run, Cli};

fn fail(code: &str, message: &str) -> ExitCode {
    eprintln!("ttc: error[{code}]: {message}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    // The worker cap must land before anything spawns the global pool.
    if let Err(e) = init_workers() {
        return fail(e.code(), &e.to_string());
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // Collapse the rendered clap error to its first line.
            let rendered = e.render().to_string();
            let line = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid command line");
            let line = line.trim_start_matches("error: ").trim();
            return fail("invalid-argument", line);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.code(), &e.to_string()),
    }
}
