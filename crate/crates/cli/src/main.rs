use std::process::ExitCode;

use clap::Parser;
use mgig::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match mgig::execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
