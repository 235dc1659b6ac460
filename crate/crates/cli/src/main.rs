use std::process::ExitCode;

use bison_cli::{dispatch, exit_code, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as a tick limit.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(t) => ExitCode::from(exit_code(t)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
