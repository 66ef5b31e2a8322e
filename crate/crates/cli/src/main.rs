use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seqdecode::config::{ExperimentConfig, OutputFormat};
use seqdecode::experiment::{
    cmd_capacity, cmd_compare, cmd_simulate, cmd_verify, write_rows, Status,
};
use seqdecode::{Budget, Error, Result};
use serde::Serialize;

/// Sequential decoding experiments for classical-quantum channels.
///
/// Budget limits can be raised or lowered with SEQDECODE_MAX_DIM,
/// SEQDECODE_MAX_ENUM, SEQDECODE_MAX_DENSE_DIM and SEQDECODE_MAX_CODEWORDS.
#[derive(Debug, Parser)]
#[command(name = "seqdecode", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Holevo quantity and entropies per channel.
    Capacity,
    /// Bound and POVM checks on every grid point.
    Verify,
    /// Monte Carlo error rates per grid point and method.
    Simulate,
    /// Sequential, subspace and PGM errors side by side.
    Compare,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Report,
}

/// A verification check failed.
const EXIT_VIOLATION: u8 = 3;
const EXIT_RESOURCE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("seqdecode: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output.path = Some(out);
    }
    if let Some(format) = cli.format {
        cfg.output.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Report => OutputFormat::Report,
        };
    }
    if cli.jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let budget = Budget::from_env()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Capacity => {
            let rows = cmd_capacity(&cfg)?;
            emit("capacity", &cfg, &rows)?;
            Ok(0)
        }
        Command::Verify => {
            let rows = cmd_verify(&cfg, &budget)?;
            emit("verify", &cfg, &rows)?;
            let statuses: Vec<_> = rows.iter().map(|r| (r.status, r.detail.as_str())).collect();
            Ok(exit_for(&statuses))
        }
        Command::Simulate => {
            let rows = cmd_simulate(&cfg, &budget)?;
            emit("simulate", &cfg, &rows)?;
            let statuses: Vec<_> = rows.iter().map(|r| (r.status, r.reason.as_str())).collect();
            Ok(exit_for(&statuses))
        }
        Command::Compare => {
            let rows = cmd_compare(&cfg, &budget)?;
            emit("compare", &cfg, &rows)?;
            let statuses: Vec<_> = rows.iter().map(|r| (r.status, r.reason.as_str())).collect();
            Ok(exit_for(&statuses))
        }
    })
}

/// 3 if any check failed, 2 if every row was skipped for budget reasons.
fn exit_for(rows: &[(Status, &str)]) -> u8 {
    if rows.iter().any(|(s, _)| *s == Status::Fail) {
        EXIT_VIOLATION
    } else if !rows.is_empty()
        && rows
            .iter()
            .all(|(s, reason)| *s == Status::Skipped && reason.starts_with("budget"))
    {
        EXIT_RESOURCE
    } else {
        0
    }
}

fn emit<R: Serialize>(command: &str, cfg: &ExperimentConfig, rows: &[R]) -> Result<()> {
    match &cfg.output.path {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_rows(command, cfg, cfg.output.format, rows, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            write_rows(command, cfg, cfg.output.format, rows, stdout.lock())?;
        }
    }
    Ok(())
}
