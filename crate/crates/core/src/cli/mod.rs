//! Command-line front end. `main` returns the process exit code:
//! 0 success, 2 configuration error, 3 numerical failure, 4 I/O or input format.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::Error;
use config::ConfigError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Parser)]
#[command(
    name = "biphoton",
    version,
    about = "Simulate and analyze polarization-frequency entangled photon pairs"
)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master RNG seed, overriding detection.seed.
    #[arg(long, global = true, env = "BIPHOTON_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "BIPHOTON_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,
    /// Output formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',', default_values = ["csv", "json", "svg"])]
    pub format: Vec<Format>,
    /// Override one config key, e.g. `--set detection.duration_s=7800`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-sided envelope histogram without the beam splitter.
    Envelope,
    /// Two-photon beat histogram, normalization and phase fit.
    Beating,
    /// Polarization-correlation scans.
    Polarization,
    /// Simulate or ingest tomography counts and reconstruct the state.
    Tomography,
    /// CHSH optimum of a density matrix.
    Chsh {
        /// Density matrix JSON as written by `tomography`; the configured source state otherwise.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Print the sixteen hyperentangled catalog states.
    States,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Read { .. }) => EXIT_IO,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse(_)) => EXIT_IO,
            CliError::Run(Error::InvalidParameter(_)) => EXIT_CONFIG,
            CliError::Run(_) => EXIT_NUMERIC,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let env = config::env_overrides(std::env::vars());
    let cfg = config::load(cli.config.as_deref(), &env, &cli.set, cli.seed)?;
    let mut formats = cli.format.clone();
    formats.sort();
    formats.dedup();
    let out = commands::Outputs::new(cli.out_dir.clone(), formats);
    commands::dispatch(&cli.command, &cfg, &out)
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(
            CliError::from(ConfigError::Invalid("x".into())).exit_code(),
            EXIT_CONFIG
        );
        assert_eq!(CliError::from(Error::Parse("x".into())).exit_code(), EXIT_IO);
        assert_eq!(CliError::from(Error::FitFailed("x".into())).exit_code(), EXIT_NUMERIC);
        assert_eq!(
            CliError::from(Error::RankDeficient { rank: 3, needed: 16 }).exit_code(),
            EXIT_NUMERIC
        );
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn formats_parse_as_list() {
        let cli = Cli::try_parse_from(["biphoton", "--format", "csv,svg", "states"]).unwrap();
        assert_eq!(cli.format, vec![Format::Csv, Format::Svg]);
    }
}
