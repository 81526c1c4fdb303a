//! Experiment driver. Exit codes: 0 all assertions held, 1 a hard assertion
//! failed or a computation errored, 2 the configuration was rejected.

use clap::{Parser, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use torus_gas::config::ExperimentConfig;
use torus_gas::runner::{self, Command};
use torus_gas::Error;

#[derive(Clone, Copy, ValueEnum)]
enum CommandArg {
    CheckKernel,
    Equilibrium,
    VerifySplitting,
    VerifyRegularization,
    Construct,
    Sample,
    Concentration,
    Laplace,
    Partition,
    All,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::CheckKernel => Command::CheckKernel,
            CommandArg::Equilibrium => Command::Equilibrium,
            CommandArg::VerifySplitting => Command::VerifySplitting,
            CommandArg::VerifyRegularization => Command::VerifyRegularization,
            CommandArg::Construct => Command::Construct,
            CommandArg::Sample => Command::Sample,
            CommandArg::Concentration => Command::Concentration,
            CommandArg::Laplace => Command::Laplace,
            CommandArg::Partition => Command::Partition,
            CommandArg::All => Command::All,
        }
    }
}

#[derive(Parser)]
#[command(version, about = "Torus gas experiment driver")]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    command: CommandArg,
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap; modules parallelize internally.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().ok();
    }
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    };
    let cfg = match cfg {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match runner::run(cli.command.into(), &cfg, cli.out, cli.seed) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config { .. }) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
