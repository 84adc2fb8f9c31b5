use std::process::ExitCode;

use clap::Parser;
use pgg_cli::{run, Cli, USAGE_EXIT};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE_EXIT as u8)
        }
    }
}
