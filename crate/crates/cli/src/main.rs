use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(listdistill_cli::run(std::env::args_os()))
}
