//! Command-line front end for the eeopa simulator.
//!
//! Settings come from command-line flags, then the `--config` file, then
//! built-in defaults. Exit status: 0 success, 1 usage or configuration error,
//! 2 computation or I/O error, 3 verification failure.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
mod plot;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use eeopa_core::{par, Execution};

pub use config::{parse_config, ConfigError, Overrides, RunConfig, OUT_DIR_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Compute(#[from] eeopa_core::Error),
    #[error("{0}")]
    Failed(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Compute(_) | CliError::Failed(_) | CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "eeopa",
    version,
    about = "Energy-efficient power allocation for MIMO-OFDM links under QoS constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file (`key = value` per line)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory [env: EEOPA_OUT_DIR]
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker thread cap
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// QoS exponent (1/bit)
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Average power budget per subchannel
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub pbar: Option<f64>,
    /// Transmit antennas
    #[arg(long, global = true)]
    pub mt: Option<usize>,
    /// Receive antennas
    #[arg(long, global = true)]
    pub mr: Option<usize>,
    /// Subcarriers
    #[arg(long, global = true)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the ordered-gain densities and Monte-Carlo histograms
    Marginals,
    /// Solve the per-group thresholds over the theta and p_bar grids
    Thresholds,
    /// Effective capacity and energy efficiency at one (theta, p_bar) point
    Capacity,
    /// Sweep the theta and p_bar grids
    Sweep,
    /// EEOPA against average power allocation at one point
    Compare,
    /// Cross-check closed forms, quadrature and Monte-Carlo densities
    Verify,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            theta: self.theta,
            p_bar: self.pbar,
            m_t: self.mt,
            m_r: self.mr,
            n_subcarriers: self.n,
            seed: self.seed,
            threads: self.threads,
            out_dir: self.out.clone(),
        }
    }
}

/// Loads the configuration file (if any) and applies the flags.
pub fn load_config(args: &GlobalArgs) -> Result<RunConfig, CliError> {
    let base = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    Ok(base.with_overrides(&args.overrides())?)
}

/// Runs one already-parsed invocation.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(&cli.global)?;
    if let Some(t) = config.threads {
        if !par::configure_threads(t) {
            let _ = writeln!(stderr, "note: thread cap {t} not applied");
        }
    }
    let env = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let mut ctx = commands::Context {
        config: &config,
        out_dir: config.resolve_out_dir(env),
        exec: Execution::default(),
        stdout,
        stderr,
    };
    match cli.command {
        Command::Marginals => commands::marginals(&mut ctx),
        Command::Thresholds => commands::thresholds(&mut ctx),
        Command::Capacity => commands::capacity(&mut ctx),
        Command::Sweep => commands::sweep_command(&mut ctx),
        Command::Compare => commands::compare(&mut ctx),
        Command::Verify => commands::verify_command(&mut ctx),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
