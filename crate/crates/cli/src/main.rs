//! `vcl-lab`: experiments and verifications for the variance constancy
//! loss stack, one subcommand per study. Exit codes: 0 when every enabled
//! check passes, 1 on a failed check or runtime abort, 2 on usage or
//! configuration errors.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vcl_lab::config::{
    read_toml, ActivationHistConfig, BoundCheckConfig, GmmPhaseConfig, StatsVerifyConfig,
    TrainCommandConfig,
};
use vcl_lab::{commands, CmdError, CmdResult};

#[derive(Parser)]
#[command(name = "vcl-lab", version, about = "Variance constancy loss experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file for the subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for reports and data tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed from the configuration file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form moment statistics against Monte-Carlo oracles.
    StatsVerify(Common),
    /// Mixture-projection phase experiment (descent and unit training).
    GmmPhase(Common),
    /// Train a fully-connected classifier with the chosen normalizer.
    Train(Common),
    /// Per-unit activation histograms and kurtosis of a saved model.
    ActivationHist(Common),
    /// Batch-variance concentration against the kurtosis bound.
    BoundCheck(Common),
}

fn dispatch(command: &Command) -> CmdResult {
    match command {
        Command::StatsVerify(common) => {
            let mut cfg: StatsVerifyConfig = read_toml(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            commands::stats_verify::run(&cfg, &common.out)
        }
        Command::GmmPhase(common) => {
            let mut cfg: GmmPhaseConfig = read_toml(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            commands::gmm_phase::run(&cfg, &common.out)
        }
        Command::Train(common) => {
            let mut cfg: TrainCommandConfig = read_toml(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            commands::train::run(&cfg, &common.out)
        }
        Command::ActivationHist(common) => {
            let mut cfg: ActivationHistConfig = read_toml(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            commands::activation_hist::run(&cfg, &common.out)
        }
        Command::BoundCheck(common) => {
            let mut cfg: BoundCheckConfig = read_toml(&common.config)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            commands::bound_check::run(&cfg, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed; see the report for details");
            ExitCode::from(1)
        }
        Err(CmdError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CmdError::Run(msg)) => {
            eprintln!("run error: {msg}");
            ExitCode::from(1)
        }
    }
}
