//! `autobid` command-line driver. See `autobid --help` for the subcommands.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use autobid_core::Scoring;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "autobid",
    version,
    about = "ROI-constrained autobidding simulator"
)]
struct Cli {
    /// Repeat for more detail (`-v` per-seed lines, `-vv` per-horizon details).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one episode per seed and write per-seed JSON and trajectory CSV.
    Run(RunArgs),
    /// Run every (horizon, seed) pair and fit log-log slopes.
    Sweep(SweepArgs),
    /// Summarize a finished sweep directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Override a config key, e.g. `--set horizon=4096` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seeds as `1..20` or `1,2,3`; replaces the config's list.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, value_enum)]
    pub scoring: Option<ScoringArg>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory holding sweep artifacts.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    #[arg(long)]
    pub regret_slope_max: Option<f64>,
    #[arg(long)]
    pub violation_slope_max: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScoringArg {
    Expected,
    Realized,
}

impl From<ScoringArg> for Scoring {
    fn from(s: ScoringArg) -> Self {
        match s {
            ScoringArg::Expected => Scoring::Expected,
            ScoringArg::Realized => Scoring::Realized,
        }
    }
}

/// An error plus the exit status it maps to: 2 for bad input, 1 otherwise.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            code: 2,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        Self {
            code: 1,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn io(what: impl fmt::Display, e: std::io::Error) -> Self {
        Self {
            code: 1,
            error: anyhow::Error::new(e).context(what.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<autobid_core::Error> for Failure {
    fn from(e: autobid_core::Error) -> Self {
        use autobid_core::Error as E;
        let input = |e: &E| {
            matches!(
                e,
                E::Config(_) | E::Parse { .. } | E::InvalidDistribution(_)
            )
        };
        let code = match &e {
            E::Sweep { source, .. } if input(source) => 2,
            e if input(e) => 2,
            _ => 1,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => commands::run(&args, cli.verbose),
        Command::Sweep(args) => commands::sweep(&args, cli.verbose),
        Command::Report(args) => commands::report(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
