use std::process::ExitCode;

use atrt_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("atrt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
