use std::process::ExitCode;

fn main() -> ExitCode {
    sepaff::cli::run()
}
