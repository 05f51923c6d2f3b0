use std::process::ExitCode;

use clap::Parser;
use singular_lp_cli::error::{EXIT_OK, EXIT_VALIDATION};
use singular_lp_cli::{run, RunConfig};

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::from(EXIT_OK as u8);
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().to_string();
            let message = serde_json::to_string(&first).unwrap_or_default();
            eprintln!("error code={EXIT_VALIDATION} kind=usage message={message}");
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
