//! Batch front-end for the measurement-compression library.
//!
//! Subcommands:
//!
//! * `validate`    — parse the config and check state/ensemble/POVM validity.
//! * `compress`    — run the (l, δ, seed) grid, emit a CSV row per cell and a
//!   JSON report with full diagnostics.
//! * `suite`       — run the cross-module invariant suite and print a
//!   pass/fail matrix.
//! * `holevo`      — mutual information, both Holevo-type bounds, the dual
//!   triple, and the compression chain for the configured ensemble.
//! * `chernoff-mc` — Monte-Carlo check of the operator concentration bound.
//!
//! Exit codes: 0 ok, 1 runtime error, 2 validation failure, 3 suite failure.

mod chernoff;
mod compress;
mod holevo;
mod suite;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use povm_squeeze_core::io::ExperimentConfig;

/// Environment variable whose seed beats `--seed`, which beats the config's
/// seed list. Intended for quick deterministic smoke runs.
pub(crate) const SEED_ENV: &str = "POVM_SQUEEZE_SEED";

#[derive(Parser)]
#[command(
    name = "povm-squeeze",
    version,
    about = "Compress collective quantum measurements and verify the bounds they obey"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory reports and CSV files are written into.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads for grid cells (library default when omitted).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed overriding the config's seed list (POVM_SQUEEZE_SEED beats this).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap on the dense product dimension d^l, overriding the config.
    #[arg(long, global = true)]
    cap_dim: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check config schema, grid sanity, and problem validity.
    Validate,
    /// Run the compression grid; write results.csv and report.json.
    Compress,
    /// Run the invariant suite; nonzero exit iff any check fails.
    Suite,
    /// Information bounds, dual triple, and chain for the configured problem.
    Holevo,
    /// Operator-concentration Monte Carlo; writes chernoff.csv.
    ChernoffMc {
        /// Operator dimension.
        #[arg(long, default_value_t = 2)]
        dim_k: usize,
        /// Spectral floor s of the family mean.
        #[arg(long, default_value_t = 0.25)]
        s: f64,
        /// Oversampling margin η.
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        /// Samples per trial.
        #[arg(long, default_value_t = 64)]
        m: u64,
        /// Monte-Carlo trials.
        #[arg(long, default_value_t = 10_000)]
        trials: u32,
    },
}

/// A command failure carrying its exit code.
pub(crate) enum Failure {
    /// Unexpected computation or I/O problem (exit 1).
    Runtime(String),
    /// Bad input: schema, grid, or problem validity (exit 2).
    Validation(String),
    /// An invariant or bound check failed (exit 3).
    Suite(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Suite(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Runtime(m) | Failure::Validation(m) | Failure::Suite(m) => m,
        }
    }
}

pub(crate) type CmdResult = Result<(), Failure>;

/// Resolves the global seed override: environment first, then the flag.
pub(crate) fn seed_override(flag: Option<u64>) -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(text) => text.trim().parse::<u64>().map(Some).map_err(|e| {
            Failure::Validation(format!("{SEED_ENV}={text:?} is not a u64: {e}"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(Failure::Validation(format!("{SEED_ENV}: {e}"))),
    }
}

/// Loads the config named by `--config`, required for most subcommands.
pub(crate) fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, Failure> {
    let path = path
        .as_ref()
        .ok_or_else(|| Failure::Validation("this subcommand needs --config PATH".into()))?;
    ExperimentConfig::load(path)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

/// Applies the `--cap-dim` override onto a loaded config.
pub(crate) fn apply_cap(config: &mut ExperimentConfig, cap_dim: Option<usize>) {
    if cap_dim.is_some() {
        config.caps.cap_dim = cap_dim;
    }
}

fn run(cli: &Cli) -> CmdResult {
    let seed = seed_override(cli.seed)?;
    match &cli.command {
        Command::Validate => validate::run(cli),
        Command::Compress => compress::run(cli, seed),
        Command::Suite => suite::run(cli, seed),
        Command::Holevo => holevo::run(cli, seed),
        Command::ChernoffMc { dim_k, s, eta, m, trials } => {
            chernoff::run(cli, seed.unwrap_or(0), *dim_k, *s, *eta, *m, *trials)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
