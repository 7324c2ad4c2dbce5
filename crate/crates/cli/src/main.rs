use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emiprior_cli::{error_line, run, CliError, Command, Overrides, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "emiprior",
    version,
    about = "Emissivity profiles from hinge data and land-cover priors"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Pick one admissible profile per grid point
    Select(Common),
    /// A-priori weights from land-cover footprints
    Apriori(Common),
    /// Greedy channel reduction of the profile covariance
    Reduce(Common),
    /// Bayesian fit at every grid point
    Fit(Common),
    /// Compare fits and hinge splines against reference measurements
    Evaluate(Common),
    /// Top-of-atmosphere radiance spectrum for a column
    Rte(Common),
    /// Write a seeded synthetic dataset and a config for it
    Synth(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (cmd, args) = match cli.command {
        Sub::Select(a) => (Command::Select, a),
        Sub::Apriori(a) => (Command::Apriori, a),
        Sub::Reduce(a) => (Command::Reduce, a),
        Sub::Fit(a) => (Command::Fit, a),
        Sub::Evaluate(a) => (Command::Evaluate, a),
        Sub::Rte(a) => (Command::Rte, a),
        Sub::Synth(a) => (Command::Synth, a),
    };
    let mut cfg = PipelineConfig::load(&args.config)?;
    cfg.apply(&Overrides {
        out: args.out,
        seed: args.seed,
        workers: args.workers,
    })?;
    for path in run(cmd, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EMIPRIOR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            let err = CliError::Config(first.trim_start_matches("error: ").to_owned());
            eprintln!(
                "{}",
                error_line(&err).replacen("kind=config", "kind=usage", 1)
            );
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
