use std::process::ExitCode;

fn main() -> ExitCode {
    pancake_cli::run(std::env::args_os())
}
