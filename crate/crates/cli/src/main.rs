use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use revolve_cli::commands::{read_config, workers_from_env};
use revolve_cli::{run, CliError, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "revolve", version, about = "Markovian random evolutions and their diffusion limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `evolution.seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the operator identities and the assembled limit generator
    VerifyOperators(Common),
    /// Print the drift and diffusion matrix of the limit
    LimitCoeffs {
        #[command(flatten)]
        common: Common,
        /// Also print the drift in the S = -(s, ∇) convention
        #[arg(long)]
        paper_sign: bool,
    },
    /// Simulate an ensemble and write its endpoints
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write every segment of every path
        #[arg(long)]
        full_trajectories: bool,
    },
    /// Sweep epsilon and fit the distance to the limit law
    Converge(Common),
    /// Simulate, compare with the limit law and write a summary
    Report(Common),
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let workers = workers_from_env(std::env::var("REVOLVE_THREADS").ok().as_deref())?;
    let (mode, common, paper_sign, full_trajectories) = match cli.command {
        Command::VerifyOperators(c) => (Mode::VerifyOperators, c, false, false),
        Command::LimitCoeffs { common, paper_sign } => (Mode::LimitCoeffs, common, paper_sign, false),
        Command::Simulate { common, full_trajectories } => (Mode::Simulate, common, false, full_trajectories),
        Command::Converge(c) => (Mode::Converge, c, false, false),
        Command::Report(c) => (Mode::Report, c, false, false),
    };
    let config = read_config(&common.config)?;
    let options = RunOptions {
        out: common.out,
        seed: common.seed,
        paper_sign,
        full_trajectories,
        workers,
    };
    run(mode, &config, &options)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
