use std::process::ExitCode;

use clap::Parser;
use searchdepth::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {}", anyhow::Error::new(e));
            ExitCode::from(code)
        }
    }
}
