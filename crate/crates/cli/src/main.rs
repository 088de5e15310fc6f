use std::process::ExitCode;

use clap::Parser;
use condmode_cli::args::Cli;
use condmode_cli::{commands, configure_threads, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| commands::run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `condmode --help` for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
