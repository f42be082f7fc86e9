//! Command-line front end. [`run`] is the whole program minus process exit.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid input.
//! Errors are written to stderr as `{"error": <kind>, "message": <text>}`.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use commands::Report;
use config::{CommonArgs, Format, RunConfig};
use output::{json_text, Units};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "privmask",
    version,
    about = "Privacy-mask analysis and design for a cloud-controlled LQG loop"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state leakage and cost for one mask design (JSON).
    Analyze(CommonArgs),
    /// Leakage and cost over an (m, n) grid (CSV).
    Grid(CommonArgs),
    /// Leakage as a function of the noise-to-noise ratio (CSV).
    AlphaSweep(CommonArgs),
    /// Optimal noise ratio, trade-off points and recommended masks (JSON).
    Design(CommonArgs),
    /// Monte Carlo check of the closed-form cost and covariance (JSON).
    Simulate(CommonArgs),
    /// Exact finite-horizon information identities (CSV).
    Verify(CommonArgs),
}

type Handler = fn(&RunConfig) -> Result<Report>;

impl Command {
    fn parts(&self) -> (&CommonArgs, Handler, Format) {
        match self {
            Command::Analyze(a) => (a, commands::analyze, Format::Json),
            Command::Grid(a) => (a, commands::grid, Format::Csv),
            Command::AlphaSweep(a) => (a, commands::alpha_sweep, Format::Csv),
            Command::Design(a) => (a, commands::design, Format::Json),
            Command::Simulate(a) => (a, commands::simulate, Format::Json),
            Command::Verify(a) => (a, commands::verify, Format::Csv),
        }
    }
}

fn error_object(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn execute(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let (args, handler, default_format) = cmd.parts();
    let cfg = RunConfig::resolve(args)?;
    let report = match cfg.threads {
        Some(0) => return Err(Error::InvalidArgument("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| handler(&cfg))?,
        None => handler(&cfg)?,
    };
    let units = Units { bits: cfg.bits };
    let text = match cfg.format.unwrap_or(default_format) {
        Format::Csv => report.table.to_csv(units),
        Format::Json => json_text(&report.json),
    };
    for w in &report.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    match &cfg.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?,
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::InvalidArgument(format!("cannot write output: {e}")))?,
    }
    Ok(report.exit_code)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(stdout, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_INVALID
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = writeln!(stderr, "{}", error_object("Usage", e.render().to_string().trim()));
                    EXIT_INVALID
                }
            };
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_object(e.kind(), &e.to_string()));
            EXIT_INVALID
        }
    }
}
