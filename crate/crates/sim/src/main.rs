use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use coke_sim::experiment::{generate_dataset, oracle_report, run_experiment, spectra_report};
use coke_sim::io::write_dataset_csv;
use coke_sim::{ExperimentConfig, Mode, Result, SimError};

#[derive(Parser)]
#[command(name = "coke", version, about = "Decentralized kernel learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more algorithms and write traces plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the modes listed in the config.
        #[arg(long)]
        mode: Option<ModeArg>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Centralized solutions, effective degrees of freedom and required feature count.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Incidence spectra, convexity constants and the penalty bound.
    Spectra {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the synthetic dataset described by the config to CSV.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Dkla,
    Coke,
    Cta,
    All,
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, mode, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let modes = match mode {
                None => cfg.solver.modes.clone(),
                Some(ModeArg::All) => Mode::ALL.to_vec(),
                Some(ModeArg::Dkla) => vec![Mode::Dkla],
                Some(ModeArg::Coke) => vec![Mode::Coke],
                Some(ModeArg::Cta) => vec![Mode::Cta],
            };
            let summary = run_experiment(&cfg, &modes, &out)?;
            println!("{:<6}{:>8}{:>16}{:>16}{:>12}  status", "mode", "rounds", "mse_train", "consensus", "transmit");
            for r in &summary.runs {
                println!(
                    "{:<6}{:>8}{:>16.6e}{:>16.6e}{:>12}  {}",
                    r.mode, r.iterations, r.final_mse_train, r.final_consensus_residual, r.total_transmissions, r.status
                );
            }
            if let Some(r) = summary.runs.iter().find(|r| r.status == "diverged") {
                return Err(SimError::Diverged(r.mode.clone()));
            }
            Ok(())
        }
        Command::Oracle { config } => {
            print!("{}", oracle_report(&ExperimentConfig::load(&config)?)?);
            Ok(())
        }
        Command::Spectra { config } => {
            print!("{}", spectra_report(&ExperimentConfig::load(&config)?)?);
            Ok(())
        }
        Command::GenData { config, out } => {
            let data = generate_dataset(&ExperimentConfig::load(&config)?)?;
            write_dataset_csv(&out, &data)?;
            println!("wrote {} samples to {}", data.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
