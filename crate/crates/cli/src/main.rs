//! `transl2e`: robust L2E regression and transfer learning from the command line.
//!
//! Exit status is 0 on success, 1 for usage, configuration or input errors
//! and 2 for failures while computing or writing results. Diagnostics go to
//! standard error only.

mod commands;
mod error;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "transl2e", version, about = "Robust L2E regression and transfer learning")]
pub struct Cli {
    /// Worker threads (default: available parallelism). Never changes numeric output.
    #[arg(long, global = true, env = "TRANSL2E_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit penalized L2E regression to one dataset.
    Fit(FitArgs),
    /// Run the transfer pipeline on a target and any number of sources.
    Transfer(TransferArgs),
    /// Generate a target and source cohorts from a simulation config.
    Simulate(SimulateArgs),
    /// Run a simulation experiment and write results.csv and summary.csv.
    Experiment(ExperimentArgs),
    /// Draw boxplots of an experiment results table as SVG.
    Plot(PlotArgs),
    /// Re-run the command recorded in a run manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Lasso,
    GroupLasso,
    None,
}

/// How CSV inputs are read.
#[derive(Debug, Clone, Args)]
pub struct CsvArgs {
    /// Response column: a header name, or `#k` for the zero-based column k.
    #[arg(long)]
    pub response: String,
    /// Column of row identifiers, reported as labels of kept rows.
    #[arg(long)]
    pub label_column: Option<String>,
    /// The files have no header row; columns must be given as `#k`.
    #[arg(long)]
    pub no_header: bool,
    /// Center and scale every feature column.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PenaltyArgs {
    #[arg(long, value_enum, default_value = "lasso")]
    pub penalty: PenaltyArg,
    /// Group of each feature, comma separated (e.g. `0,0,1,1,2`), or a file holding that list.
    #[arg(long)]
    pub groups: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Fixed penalty level.
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Choose lambda by cross-validation over the default grid.
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub target: PathBuf,
    /// Source cohort; repeat for several sources.
    #[arg(long = "source")]
    pub sources: Vec<PathBuf>,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// JSON file with transfer settings (grids, folds, selection, solver).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded location.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let text = e.render().to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            return Err(CliError::Usage(text.trim_end().to_string()));
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?;
    }
    commands::dispatch(cli.command, &argv[1..], None)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
