//! Command-line harness around the `clarifuse` fusion engine: score-table
//! I/O, run manifests and the `clarifuse` subcommands.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::Parser;

pub mod args;
pub mod commands;
pub mod manifest;
pub mod table;

pub use args::{Cli, Command};

/// Invalid flag combination detected after parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(c) => commands::synth(c, out),
        Command::Learn(c) => commands::learn(c, out),
        Command::Rank(c) => commands::rank(c, out),
        Command::Eval(c) => commands::eval(c, out),
        Command::Corrupt(c) => commands::corrupt(c, out),
        Command::Alpha(c) => commands::alpha(c, out),
        Command::Experiment(c) => commands::experiment(c, out),
    }
}

/// Parses `args` and runs the command. Returns the process exit status:
/// 0 on success, 2 on usage errors, 1 on runtime errors.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
