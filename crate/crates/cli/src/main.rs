mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Pattern-based landmine risk: ingest regions, train and cross-validate
/// risk models, simulate clearance, report scorecards and serve sessions.
#[derive(Debug, Parser)]
#[command(name = "minerisk", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration. Flags and environment variables override it.
    #[arg(long, global = true, env = "MINERISK_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "MINERISK_SEED")]
    pub seed: Option<u64>,
    /// Output file. Without it JSON goes to stdout.
    #[arg(long, global = true, env = "MINERISK_OUT")]
    pub out: Option<PathBuf>,
    /// Model kind for train and cv (linear, curved, bayesian); comma-separated
    /// deminers for simulate (random, sequential, linear, curved, bayesian).
    #[arg(long, global = true, env = "MINERISK_INSTANCE", value_delimiter = ',')]
    pub instance: Vec<String>,
    /// Timesteps between risk map rebuilds.
    #[arg(long, global = true, env = "MINERISK_RECALC_INTERVAL")]
    pub recalc_interval: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a CSV or GeoJSON mine file against a region record.
    Ingest(IngestArgs),
    /// Generate a synthetic region with planted patterns.
    Synth(SynthArgs),
    /// Train a risk model on fully cleared regions.
    Train(TrainArgs),
    /// Two-fold cross-validation over the hyperparameter grid.
    Cv(CvArgs),
    /// Run deminers over a region and score them.
    Simulate(SimulateArgs),
    /// Comparison table and plot data from simulation outputs.
    Report(ReportArgs),
    /// Serve the session API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub mines: PathBuf,
    #[arg(long)]
    pub region: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// SyntheticSpec JSON; flags below override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// line, arc, multi or uniform
    #[arg(long)]
    pub pattern: Option<String>,
    #[arg(long)]
    pub n_mines: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Region width and height in meters.
    #[arg(long)]
    pub size: Option<f64>,
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub landmine_weight: Option<f64>,
    #[arg(long)]
    pub cluster_max_distance: Option<f64>,
    #[arg(long)]
    pub pc_smoothness_factor: Option<f64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training region (repeatable).
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,
    /// Take the hyperparameters of the best cell of a cv report.
    #[arg(long)]
    pub cv_report: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    /// The two training regions.
    #[arg(long = "dataset")]
    pub datasets: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Trained model (repeatable), one per pattern deminer.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub random_runs: Option<usize>,
    /// Write per-deminer clearance histories as CSV here.
    #[arg(long)]
    pub history_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Simulation outputs.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MINERISK_BIND")]
    pub bind: Option<String>,
    /// Action logs and shutdown snapshots.
    #[arg(long, env = "MINERISK_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
