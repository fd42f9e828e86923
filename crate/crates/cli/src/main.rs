use std::process::ExitCode;

fn main() -> ExitCode {
    match kanvision_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kanvision: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
