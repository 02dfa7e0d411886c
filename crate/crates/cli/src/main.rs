use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use bicx_cli::{execute, exit_code, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli);
    match &result {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(report.log.as_bytes());
        }
        Err(e) => eprintln!("error: {e:#}"),
    }
    ExitCode::from(exit_code(&result))
}
