use std::process::ExitCode;

fn main() -> ExitCode {
    bralev::cli::main()
}
