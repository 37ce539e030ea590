use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cmps_cli::commands::{self, Overrides, Summary};
use cmps_cli::config::RunConfig;
use cmps_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "cmps",
    version,
    about = "Variational ground states of 1D Bose gases in a box"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (needs the `parallel` feature).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the box state described by a config file.
    Optimize(RunArgs),
    /// Write density profiles and entanglement for a checkpoint.
    Observe(ObserveArgs),
    /// Boundary energy: box energy minus length times the uniform energy density.
    Casimir(RunArgs),
    /// Solve the translation-invariant problem.
    Uniform(RunArgs),
    /// Exact hard-core state on the config mesh.
    TgReference(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `io.out_dir`, then $CMPS_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Profile samples on [0, L], walls included.
    #[arg(long)]
    samples: Option<usize>,
    /// Entanglement cuts: `chebyshev:N`, `uniform:N` or `x1,x2,...`.
    #[arg(long)]
    cuts: Option<String>,
    /// Uniform checkpoint to reuse (casimir only).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct ObserveArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Config supplying Taylor tolerances, samples and cuts.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    cuts: Option<String>,
}

fn overrides(a: &RunArgs) -> Overrides {
    Overrides {
        out: a.out.clone(),
        seed: a.seed,
        samples: a.samples,
        cuts: a.cuts.clone(),
        checkpoint: a.checkpoint.clone(),
    }
}

fn set_threads(n: Option<usize>) {
    let Some(n) = n else { return };
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        eprintln!("could not set {n} threads: {e}");
    }
    #[cfg(not(feature = "parallel"))]
    eprintln!("built without the `parallel` feature; ignoring --threads {n}");
}

fn run(cli: Cli) -> Result<Summary, CliError> {
    let with_config = |a: &RunArgs, f: fn(&RunConfig, &str, &Overrides) -> Result<Summary, CliError>| {
        let (config, text) = RunConfig::load(&a.config)?;
        f(&config, &text, &overrides(a))
    };
    match &cli.command {
        Command::Optimize(a) => with_config(a, commands::optimize),
        Command::Casimir(a) => with_config(a, commands::casimir),
        Command::Uniform(a) => with_config(a, commands::uniform),
        Command::TgReference(a) => with_config(a, commands::tg_reference),
        Command::Observe(a) => {
            let config = a.config.as_deref().map(RunConfig::load).transpose()?.map(|(c, _)| c);
            let over = Overrides {
                out: a
                    .out
                    .clone()
                    .or_else(|| config.as_ref().and_then(|c| c.io.out_dir.clone())),
                samples: a.samples.or(config.as_ref().map(|c| c.io.samples)),
                cuts: a.cuts.clone().or(config.as_ref().map(|c| c.io.cuts.clone())),
                ..Overrides::default()
            };
            let taylor = config.map(|c| c.optimizer.taylor()).unwrap_or_default();
            commands::observe(&a.checkpoint, &over, &taylor)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    set_threads(cli.threads);
    match run(cli) {
        Ok(summary) => {
            for line in summary.lines() {
                println!("{line}");
            }
            if summary.stalled {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
