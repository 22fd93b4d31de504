use std::process::ExitCode;

fn main() -> ExitCode {
    orthorecon_cli::main_exit().into()
}
