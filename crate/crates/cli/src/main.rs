use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use msmixer_cli::commands;
use msmixer_cli::config::{resolve, CommonArgs};

/// Multi-scale mixer forecasting benchmark harness.
#[derive(Parser)]
#[command(name = "msmixer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on one dataset and write its run directory
    Train(CommonArgs),
    /// Run the full benchmark grid (4 datasets × 4 horizons × 3 models)
    Benchmark(CommonArgs),
    /// Run the six component-ablation variants on one dataset/horizon
    Ablate(CommonArgs),
    /// Run the look-back and scale-count sensitivity sweeps
    Sensitivity(CommonArgs),
    /// Regenerate summary tables from stored run reports
    Report {
        /// Directory containing run subdirectories with report.json files
        #[arg(long, default_value = "runs")]
        run_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(args) => resolve(args).and_then(|opts| commands::cmd_train(&opts)),
        Command::Benchmark(args) => resolve(args).and_then(|opts| commands::cmd_benchmark(&opts)),
        Command::Ablate(args) => resolve(args).and_then(|opts| commands::cmd_ablate(&opts)),
        Command::Sensitivity(args) => {
            resolve(args).and_then(|opts| commands::cmd_sensitivity(&opts))
        }
        Command::Report { run_dir } => commands::cmd_report(run_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
