use std::path::PathBuf;
use std::process::ExitCode;

use centroaffine::sphere::Resolution;
use centroaffine_cli::config::parse_resolution;
use centroaffine_cli::{execute, CliError, Command, Overrides, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "centroaffine", version, about = "Centro-affine invariants and inequality checks for smooth convex bodies")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Every invariant at two resolutions, with drift.
    Report(Flags),
    /// The inequality suite, one row per check.
    Suite(Flags),
    /// Limit sequences, both exponent variants.
    Converge(Flags),
    /// Flow trace and the volume-variation cross-check (planar bodies).
    Flow(Flags),
    /// Random bodies through the suite, logging near-tight checks.
    Falsify(Flags),
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fine grid: N (circle) or Ntheta,Nphi (sphere); the coarse grid is half.
    #[arg(long, value_name = "N[,M]", value_parser = parse_resolution)]
    resolution: Option<Resolution>,
    /// Last index of the limit sequences.
    #[arg(long)]
    pmax: Option<usize>,
}

fn run(command: Command, flags: Flags) -> Result<i32, CliError> {
    let mut config = RunConfig::load(&flags.config)?;
    config.apply(&Overrides {
        seed: flags.seed,
        out: flags.out,
        resolution: flags.resolution,
        p_max: flags.pmax,
    });
    let outcome = execute(command, &config)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    println!("{}", outcome.summary);
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, flags) = match cli.command {
        Cmd::Report(f) => (Command::Report, f),
        Cmd::Suite(f) => (Command::Suite, f),
        Cmd::Converge(f) => (Command::Converge, f),
        Cmd::Flow(f) => (Command::Flow, f),
        Cmd::Falsify(f) => (Command::Falsify, f),
    };
    match run(command, flags) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
