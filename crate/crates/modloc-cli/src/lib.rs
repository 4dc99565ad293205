//! The `modloc` command line: build artifacts, localize bumps, run the
//! verification suite and render its reports.
//!
//! Exit codes: 0 success, 1 some check failed, 2 invalid configuration,
//! 3 a computation or I/O error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::Overrides;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Artifact(#[from] modloc::artifact::ArtifactError),
    #[error(transparent)]
    Spectral(#[from] modloc::spectral_rep::SpectralError),
    #[error(transparent)]
    Laguerre(#[from] modloc::laguerre::LaguerreError),
    #[error(transparent)]
    Localization(#[from] modloc::localization::LocalizationError),
    #[error(transparent)]
    Verification(#[from] modloc::verification::VerificationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    /// Innermost error variant, e.g. `QuadratureUnderResolved`.
    pub fn name(&self) -> String {
        match self {
            CliError::Config(_) => "ConfigError".into(),
            CliError::Io(_) => "Io".into(),
            CliError::Json(_) => "Json".into(),
            CliError::Csv(_) => "Csv".into(),
            CliError::Artifact(e) => variant_name(&format!("{e:?}")),
            CliError::Spectral(e) => variant_name(&format!("{e:?}")),
            CliError::Laguerre(e) => variant_name(&format!("{e:?}")),
            CliError::Localization(e) => variant_name(&format!("{e:?}")),
            CliError::Verification(e) => variant_name(&format!("{e:?}")),
        }
    }
}

/// Follows `Outer(Inner(..))` in a derived `Debug` string down to the last
/// variant name.
fn variant_name(debug: &str) -> String {
    let mut name = "";
    for seg in debug.split('(') {
        let ident_len = seg.find(|c: char| !c.is_alphanumeric() && c != '_').unwrap_or(seg.len());
        let ident = &seg[..ident_len];
        if ident.is_empty() || !ident.starts_with(|c: char| c.is_ascii_uppercase()) {
            break;
        }
        name = ident;
        if ident_len != seg.len() {
            break;
        }
    }
    name.to_string()
}

#[derive(Debug, Parser)]
#[command(name = "modloc", version, about = "Truncated SL(2,R) generators, local states and their verification")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Build the generator matrices and write a representation artifact.
    Build {
        #[command(flatten)]
        o: Overrides,
    },
    /// Localize bumps on each interval into both backends.
    Localize {
        #[command(flatten)]
        o: Overrides,
        /// Use the matrices from this artifact instead of building them.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Run the verification suite.
    Verify {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Re-render a report written by `verify`.
    Report {
        input: PathBuf,
        #[command(flatten)]
        o: Overrides,
        /// Emit the curve data (F(α) profiles, r(M)) as CSV.
        #[arg(long)]
        curves: bool,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            e.exit_code()
        }
    }
}
