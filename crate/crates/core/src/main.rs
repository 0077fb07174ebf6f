use std::io::{self, IsTerminal};
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let is_terminal = stdout.is_terminal();
    let code = ozmac::cli::run(
        std::env::args_os(),
        &mut stdout.lock(),
        &mut io::stderr().lock(),
        is_terminal,
    );
    ExitCode::from(code as u8)
}
