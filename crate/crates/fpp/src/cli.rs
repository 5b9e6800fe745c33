//! Command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::commands::{run, RunError, Subcommand};
use crate::config::{load_config, ConfigFile, Overrides};

#[derive(Debug, Parser)]
#[command(name = "fpp", version, about = "Directed first-passage percolation experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Weight law, e.g. `exp:rate=1` or `gamma:shape=2,rate=1`.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

pub fn execute(cli: Cli) -> Result<(), RunError> {
    let file = match &cli.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    let over = Overrides { seed: cli.seed, samples: cli.samples, law: cli.law, d: cli.d, out: cli.out, workers: cli.workers };
    let env = std::env::var("FPP_WORKERS").ok();
    let cfg = file.resolve(&over, env.as_deref())?;
    let manifest = run(cli.subcommand, &cfg)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, cfg.out.join(&f.name).display());
    }
    Ok(())
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
