//! The `costroute` command line: validate, featurize, train, route, sweep,
//! evaluate, sharpness and synthetic generation.
//!
//! [`run`] does all the work and returns a [`CommandOutcome`]; the binary only
//! forwards its streams and exit code.

mod args;
mod commands;
mod output;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommandOutcome {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

/// A failed command, already classified by exit code.
#[derive(Debug)]
pub(crate) struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, msg: msg.into() }
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, msg: msg.into() }
    }
}

impl From<costroute::Error> for Failure {
    fn from(e: costroute::Error) -> Self {
        let code = if e.is_computational() { EXIT_COMPUTE } else { EXIT_DATA };
        Failure { code, msg: e.to_string() }
    }
}

pub(crate) type CmdResult = Result<(), Failure>;

/// Parses `argv` (program name first) and executes the command.
pub fn run<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                CommandOutcome { code: EXIT_USAGE, stdout: Vec::new(), stderr: rendered }
            } else {
                // --help and --version
                CommandOutcome { code: EXIT_OK, stdout: rendered.into_bytes(), stderr: String::new() }
            };
        }
    };
    let mut out = Vec::new();
    match commands::dispatch(cli.command, &mut out) {
        Ok(()) => CommandOutcome { code: EXIT_OK, stdout: out, stderr: String::new() },
        Err(f) => CommandOutcome { code: f.code, stdout: Vec::new(), stderr: format!("error: {}\n", f.msg) },
    }
}
