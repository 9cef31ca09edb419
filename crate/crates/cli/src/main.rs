mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{ConfigError, FileConfig};
use credible::TaskName;

#[derive(Parser)]
#[command(name = "credible", version, about = "Conformal credible regions for simulation-based inference")]
struct Cli {
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the coverage sweep and write summary tables.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = "results")]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long, env = "CP4SBI_SEED")]
        seed: Option<u64>,
    },
    /// Rasterize calibrated 2D regions at one observation.
    Region {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = "region")]
        out: PathBuf,
        #[arg(long, env = "CP4SBI_SEED")]
        seed: Option<u64>,
    },
    /// Simulate (θ, x) pairs from a task to CSV.
    Dataset {
        #[arg(long)]
        task: TaskName,
        #[arg(long)]
        size: usize,
        #[arg(long, env = "CP4SBI_SEED", default_value_t = 0)]
        seed: u64,
        /// Task constants from a config file's `[task]` section.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Recompute the summary table from a per-repetition CSV.
    Report {
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

enum Outcome {
    Done,
    Partial,
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Run { config, out, seed } => {
            let cfg = config::load(&config)?.experiment(seed)?;
            Ok(if commands::run(&cfg, &out)? {
                Outcome::Done
            } else {
                Outcome::Partial
            })
        }
        Command::Region { config, out, seed } => {
            let file = config::load(&config)?;
            let cfg = file.experiment(seed)?;
            commands::region(&cfg, &file.region(), &out)?;
            Ok(Outcome::Done)
        }
        Command::Dataset { task, size, seed, config, out } => {
            let file = match config {
                Some(p) => config::load(&p)?,
                None => FileConfig::default(),
            };
            let task_config = file.task_config().map_err(ConfigError)?;
            commands::dataset(task, task_config, size, seed, out.as_deref())?;
            Ok(Outcome::Done)
        }
        Command::Report { input, out } => {
            commands::report(&input, out.as_deref())?;
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match execute(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            eprintln!("error: some repetitions failed; see report.json");
            ExitCode::from(1)
        }
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
