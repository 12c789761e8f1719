//! kspec: batch driver for the spectral NSK laboratory.
//!
//! Five subcommands (validate, eigen, decay, resolvent, simulate) share one
//! TOML config format and one artifact convention: CSV tables plus a flat
//! `manifest.txt` in the output directory. Success exits 0 even when a
//! built-in check fails (the manifest records it); errors print a one-line
//! JSON report to stderr and exit 1.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Ctx};

#[derive(Parser)]
#[command(name = "kspec", version, about = "Spectral laboratory for the linearized and nonlinear NSK system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's [output] section).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for synthesized random initial data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 keeps the pool default).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Admit a config and record its canonical form and derived constants.
    Validate(CommonArgs),
    /// Sweep the symbol eigenvalues and both asymptotic regimes.
    Eigen(CommonArgs),
    /// Measure semigroup decay rates against the predicted exponent.
    Decay(CommonArgs),
    /// Sweep the measured resolvent quantity over a sector grid.
    Resolvent(CommonArgs),
    /// Integrate the nonlinear system and log the norm timeline.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Resume from a checkpoint file instead of synthesizing data.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Validate(c)
            | Command::Eigen(c)
            | Command::Decay(c)
            | Command::Resolvent(c) => c,
            Command::Simulate { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Eigen(_) => "eigen",
            Command::Decay(_) => "decay",
            Command::Resolvent(_) => "resolvent",
            Command::Simulate { .. } => "simulate",
        }
    }
}

/// Install a fixed-size global pool when --threads is explicit.
fn configure_threads(threads: usize) -> Result<(), CliError> {
    if threads == 0 {
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set --threads {threads}: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if threads == 1 {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "built without the parallel feature; --threads {threads} is unavailable"
            )))
        }
    }
}

fn try_main() -> Result<(), CliError> {
    let cli = Cli::parse();
    let common = cli.command.common();
    configure_threads(common.threads)?;

    let cfg = config::parse_config(&common.config)?;
    let canonical = config::emit_canonical(&cfg);
    let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let restart = match &cli.command {
        Command::Simulate { restart, .. } => restart.clone(),
        _ => None,
    };
    let ctx = Ctx {
        canonical,
        out,
        seed: common.seed,
        threads: common.threads,
        restart,
        cfg,
    };

    match cli.command.name() {
        "validate" => commands::run_validate(&ctx),
        "eigen" => commands::run_eigen(&ctx),
        "decay" => commands::run_decay(&ctx),
        "resolvent" => commands::run_resolvent(&ctx),
        "simulate" => commands::run_simulate(&ctx),
        _ => unreachable!(),
    }
}

fn main() {
    std::process::exit(match try_main() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    });
}
