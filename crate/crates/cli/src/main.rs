use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = costroute_cli::run(std::env::args_os());
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(&outcome.stdout).and_then(|_| stdout.flush()).is_err() {
        return ExitCode::from(costroute_cli::EXIT_DATA as u8);
    }
    eprint!("{}", outcome.stderr);
    ExitCode::from(outcome.code as u8)
}
