use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hdal_cli::{commands, service};
use hdal_core::harness::{RunOptions, MANIFEST_FILE, PAIRWISE_FILE};

#[derive(Parser)]
#[command(name = "hdal", version, about = "Hyperdimensional active learning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a learning-curve benchmark described by a TOML config.
    Run {
        config: PathBuf,
        /// Continue an interrupted run, skipping completed rounds.
        #[arg(long)]
        resume: bool,
        /// Worker threads (defaults to all cores). Results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Stop each run after this many rounds; resume later with --resume.
        #[arg(long)]
        max_rounds: Option<usize>,
    },
    /// Print predictive-entropy histograms for each prior mode.
    EntropyHist { config: PathBuf },
    /// Serve the labeling API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Where sessions are persisted.
        #[arg(long, default_value = "sessions")]
        state_dir: PathBuf,
        /// Base directory for relative dataset paths.
        #[arg(long, default_value = ".")]
        data_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            resume,
            workers,
            max_rounds,
        } => {
            let outcome = commands::run(
                &config,
                &RunOptions {
                    workers,
                    resume,
                    max_rounds,
                },
            )?;
            let m = &outcome.manifest;
            let complete = m.runs.iter().filter(|r| r.status == hdal_core::harness::RunStatus::Complete).count();
            println!("{complete}/{} runs complete", m.runs.len());
            println!("manifest: {}", outcome.output_dir.join(MANIFEST_FILE).display());
            if m.is_complete() && outcome.output_dir.join(PAIRWISE_FILE).exists() {
                println!("pairwise: {}", outcome.output_dir.join(PAIRWISE_FILE).display());
            }
        }
        Command::EntropyHist { config } => print!("{}", commands::entropy_hist(&config)?),
        Command::Serve {
            addr,
            state_dir,
            data_dir,
        } => {
            let state = service::AppState::open(&state_dir, &data_dir)?;
            eprintln!("{} session(s) reloaded from {}", state.session_ids().len(), state_dir.display());
            tokio::runtime::Runtime::new()?.block_on(service::serve(&addr, state))?;
        }
    }
    Ok(())
}
