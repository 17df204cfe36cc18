use std::process::ExitCode;

use clap::Parser;
use postsel::cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match postsel::commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
