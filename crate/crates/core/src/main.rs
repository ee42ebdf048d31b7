use std::process::ExitCode;

use clap::Parser;
use ric_diag::cli::{configure_threads, run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        return ExitCode::from(e.code);
    }
    ExitCode::from(run(cli))
}
