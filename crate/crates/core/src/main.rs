use std::process::ExitCode;

fn main() -> ExitCode {
    fqaoa::cli::main_with_args(std::env::args())
}
