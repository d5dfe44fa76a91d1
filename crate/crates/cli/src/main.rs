use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symrad_cli::run::{output_dir, run};
use symrad_cli::{fixtures, Failure, RunConfig};

#[derive(Parser)]
#[command(name = "symrad", version, about = "Symmetrization, radial shooting and a-priori bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distribution function, u* and u♯ of a field.
    Symmetrize(Args),
    /// Radial shot and optional Ψ₁ sweep.
    Shoot(Args),
    /// Maximal radial solution on a ball.
    Maximal(Args),
    /// Dirichlet or eigenvalue field solve.
    Solve(Args),
    /// Evaluate one a-priori bound.
    Bounds(Args),
    /// Comparison against the maximal radial solution.
    Verify(Args),
    /// Full acceptance suite.
    Suite {
        /// Optional suite config; defaults to all criteria at Δx = 1/128.
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the shipped example configurations into a directory.
    Fixtures {
        #[arg(default_value = "fixtures")]
        dir: PathBuf,
    },
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    config: PathBuf,
    /// Output directory, overriding SYMRAD_OUT_DIR and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (name, config, out) = match cli.command {
        Command::Fixtures { dir } => {
            for p in fixtures::write_library(&dir)? {
                println!("{}", p.display());
            }
            return Ok(());
        }
        Command::Suite { config, out } => ("suite", config, out),
        Command::Symmetrize(a) => ("symmetrize", Some(a.config), a.out),
        Command::Shoot(a) => ("shoot", Some(a.config), a.out),
        Command::Maximal(a) => ("maximal", Some(a.config), a.out),
        Command::Solve(a) => ("solve", Some(a.config), a.out),
        Command::Bounds(a) => ("bounds", Some(a.config), a.out),
        Command::Verify(a) => ("verify", Some(a.config), a.out),
    };
    let cfg = match config {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::new(symrad_cli::Task::Suite { dx: None, seed: None, criteria: None }),
    };
    if cfg.task.name() != name {
        return Err(Failure::Config(format!("config is for `{}`, not `{name}`", cfg.task.name())));
    }
    let dir = output_dir(&cfg, out.as_deref());
    let outcome = run(&cfg, &dir)?;
    println!("{name}: {}", outcome.summary);
    println!("artifacts in {}", outcome.out_dir.display());
    match outcome.violation {
        Some(v) => Err(Failure::Violation(v)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("symrad: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
