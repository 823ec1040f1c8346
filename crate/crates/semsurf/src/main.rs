use std::process::ExitCode;

fn main() -> ExitCode {
    semsurf::cli::main_with_args(std::env::args_os())
}
