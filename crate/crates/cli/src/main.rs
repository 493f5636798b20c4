use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wpmec_cli::experiment::{execute, write_outputs};
use wpmec_cli::Config;

/// Simulate online energy and offloading schedulers for wireless-powered edge computing.
#[derive(Parser)]
#[command(name = "wpmec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Comma-separated seeds (overrides `seeds`).
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Re-run a manifest written by a previous run.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_ABORT: u8 = 2;

fn load(path: &Path) -> Result<Config, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Config::parse(&text, &path.display().to_string()).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Command::Run { config, out, workers, seeds } => {
            let mut cfg = match load(&config).and_then(|mut c| c.apply_env(std::env::vars()).map(|_| c).map_err(|e| e.to_string())) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(s) = seeds {
                if let Err(e) = cfg.set("seeds", &s).and_then(|_| cfg.check()) {
                    eprintln!("error: --seeds: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            cfg
        }
        Command::Replay { manifest, out } => match load(&manifest) {
            Ok(mut cfg) => {
                if let Some(o) = out {
                    cfg.output = o;
                }
                cfg
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
    };

    let records = match execute(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ABORT);
        }
    };
    if let Err(e) = write_outputs(&cfg, &records, &cfg.output) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_ABORT);
    }
    let aborted: Vec<_> = records.iter().filter_map(|r| r.outcome.as_ref().err().map(|e| (&r.job, e))).collect();
    for (job, e) in &aborted {
        eprintln!("run {} seed {} aborted: {e}", job.policy, job.seed);
    }
    println!("{} runs written to {}", records.len(), cfg.output.display());
    if aborted.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ABORT)
    }
}
