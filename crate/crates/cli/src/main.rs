use std::process::ExitCode;

use clap::Parser;
use spinrbm_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match spinrbm_cli::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
