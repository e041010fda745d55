use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use protoscope_cli::{run, Cli, EXIT_ERROR};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share exit status 1 with parse errors; clap would use 2.
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let outcome = run(cli);
    if outcome.code == EXIT_ERROR {
        let _ = std::io::stderr().write_all(outcome.output.as_bytes());
    } else {
        let _ = std::io::stdout().lock().write_all(outcome.output.as_bytes());
    }
    ExitCode::from(outcome.code as u8)
}
