//! Command-line front end for the lazyppl model gallery.

pub mod catalog;
pub mod config;
pub mod diag;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use config::{Cli, Command};

/// Exit status for a bad flag, unknown model or unreadable input.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for a failure during inference or while writing outputs.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0:#}")]
    Config(anyhow::Error),
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn config(msg: impl std::fmt::Display) -> Self {
        Failure::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn runtime(msg: impl std::fmt::Display) -> Self {
        Failure::Runtime(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let report = run::cmd_run(&cfg)?;
            writeln!(out, "{}", report.summary_path.display())
                .map_err(|e| Failure::Runtime(e.into()))
        }
        Command::List => catalog::cmd_list(out).map_err(|e| Failure::Runtime(e.into())),
        Command::Diag(args) => {
            let d = diag::cmd_diag(&args.file)?;
            let text = serde_json::to_string_pretty(&d).map_err(|e| Failure::Runtime(e.into()))?;
            writeln!(out, "{text}").map_err(|e| Failure::Runtime(e.into()))
        }
    }
}

/// Parse `args`, run the command, and return the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
