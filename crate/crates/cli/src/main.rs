//! `hybridlin` command-line front-end.

mod commands;
mod systems;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

/// Environment override for the output directory.
pub const OUT_DIR_ENV: &str = "HYBRIDLIN_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hybridlin", version, about = "Feedback linearisation analysis and supervised multi-law simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Output derivative chain, a(x), b(x) and relative-degree verdicts.
    Derive {
        /// `ballbeam`, `doubleint` or `file:<path>`.
        #[arg(long, default_value = "ballbeam")]
        system: String,
        #[arg(long)]
        order: usize,
        /// Probe point as comma-separated coordinates; repeatable.
        #[arg(long = "probe", allow_hyphen_values = true)]
        probes: Vec<String>,
    },
    /// Run one closed-loop scenario; writes `<stem>.csv` and `<stem>.metrics.txt`.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a law set covers a state box; writes coverage.txt and witnesses.csv.
    Coverage {
        /// Comma-separated subset of 1, 2, 3, alt.
        #[arg(long, default_value = "1,2,3")]
        laws: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Half-width for x1, x2, x4; x3 always spans [-pi, pi].
        #[arg(long, default_value_t = 2.0)]
        half: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the involutivity bracket and rank escalation at probe points.
    Involutivity {
        #[arg(long, default_value = "ballbeam")]
        system: String,
        /// File with one comma-separated probe per line; `#` starts a comment.
        #[arg(long)]
        probes: Option<PathBuf>,
    },
    /// Run every `*.toml` scenario in a directory; writes per-scenario CSVs and summary.csv.
    Sweep {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Derive { system, order, probes } => commands::derive(&system, order, &probes),
        Command::Simulate { scenario, out } => commands::simulate(&scenario, &out_dir(out)?),
        Command::Coverage { laws, samples, margin, seed, half, out } => {
            commands::coverage(&laws, samples, margin, seed, half, &out_dir(out)?)
        }
        Command::Involutivity { system, probes } => commands::involutivity(&system, probes.as_deref()),
        Command::Sweep { dir, out } => commands::sweep(&dir, &out_dir(out)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
