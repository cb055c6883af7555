//! Command-line driver for the k-PNN forest experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod validate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiments::{run_experiment, Table, Value};
pub use output::RunInfo;
pub use validate::{validate, ValidationReport};

pub const WORKERS_ENV: &str = "KPNN_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "kpnn", version, about = "k-PNN random-forest Monte Carlo experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set grid.n=[1e3,1e4]`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory; overrides the config's `output`.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List the experiments and their CSV columns.
    ListExperiments,
}

/// Validates and runs `cfg` on a pool of `workers` threads.
pub fn execute(cfg: &ExperimentConfig, workers: usize) -> Result<(Table, RunInfo)> {
    let report = validate(cfg);
    if report.has_errors() {
        let msgs: Vec<String> = report.errors().map(|f| f.message.clone()).collect();
        return Err(CliError::Config(msgs.join("; ")));
    }
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let table = pool.install(|| run_experiment(cfg))?;
    Ok((
        table,
        RunInfo {
            workers,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

/// [`execute`] and write the artifacts into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, workers: usize, dir: &Path) -> Result<Table> {
    let (table, info) = execute(cfg, workers)?;
    output::write_artifacts(dir, cfg, &table, &info)?;
    Ok(table)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run_command(cmd: Command) -> Result<()> {
    match cmd {
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<18} {}", e.name(), e.description());
                println!("{:<18} columns: {}", "", e.columns().join(","));
            }
            Ok(())
        }
        Command::Validate { config, set } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            let report = validate(&cfg);
            println!("{report}");
            if report.has_errors() {
                Err(CliError::Config(format!("{} failed validation", config.display())))
            } else {
                Ok(())
            }
        }
        Command::Run {
            config,
            set,
            output,
            workers,
        } => {
            let cfg = ExperimentConfig::load(&config, &set)?;
            for w in validate(&cfg).warnings() {
                eprintln!("warning: {}", w.message);
            }
            let dir = output.unwrap_or_else(|| cfg.output.clone());
            let table = run_to_dir(&cfg, workers.unwrap_or_else(default_workers), &dir)?;
            for note in &table.notes {
                eprintln!("note: {note}");
            }
            println!("{}: {} rows written to {}", cfg.experiment.name(), table.rows.len(), dir.display());
            Ok(())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
