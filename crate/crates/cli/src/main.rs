mod args;
mod commands;
mod output;
mod svg;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Status;
use output::CliError;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const EXIT_CHEAT: u8 = 2;
const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match &cli.command {
        Command::Compare(a) => commands::compare(a),
        Command::AbortDist(a) => commands::abort_dist(a),
        Command::LeakageCurve(a) => commands::leakage_curve_cmd(a),
        Command::Attack(a) => commands::attack(a),
        Command::Chsh(a) => commands::chsh(a),
        Command::Theorem1(a) => commands::theorem1(a),
    };
    match result {
        Ok(Status::Completed) => ExitCode::SUCCESS,
        Ok(Status::CheatDetected) => ExitCode::from(EXIT_CHEAT),
        Err(e) => {
            eprintln!("qpc: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(EXIT_USAGE),
                CliError::Bound(_) | CliError::Runtime(_) => ExitCode::FAILURE,
            }
        }
    }
}
