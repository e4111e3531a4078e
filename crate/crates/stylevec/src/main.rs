use std::process::ExitCode;

fn main() -> ExitCode {
    stylevec::cli::main()
}
