use std::io;
use std::panic;
use std::process::ExitCode;

use contextrec_service::cli::{run_cli, EXIT_INTERNAL};

fn main() -> ExitCode {
    let outcome = panic::catch_unwind(|| run_cli(std::env::args_os(), &mut io::stdout(), &mut io::stderr()));
    let code = outcome.unwrap_or(EXIT_INTERNAL);
    ExitCode::from(code as u8)
}
