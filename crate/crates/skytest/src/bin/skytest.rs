use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(skytest::cli::main(std::env::args()))
}
