use std::process::ExitCode;

fn main() -> ExitCode {
    filtrate_cli::init_logging();
    let code = filtrate_cli::run_cli(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code as u8)
}
