use std::process::ExitCode;

use clap::Parser;
use entrogame::cli::{exit_code, run, Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match RunConfig::from_cli(cli).and_then(|cfg| run(&cfg)) {
        Ok(outcome) => {
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
