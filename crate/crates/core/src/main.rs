use std::process::ExitCode;

fn main() -> ExitCode {
    qite::cli::main_entry()
}
