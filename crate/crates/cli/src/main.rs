use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qha_cli::Command;

/// Run a qha experiment from a config file.
#[derive(Parser)]
#[command(name = "qha", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` config file.
    config: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    ExitCode::from(qha_cli::execute(args.command, &args.config) as u8)
}
