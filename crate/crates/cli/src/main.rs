use std::process::ExitCode;

use clap::Parser;
use spliceboot_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match spliceboot_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
