use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sdgcn::cli::main() as u8)
}
