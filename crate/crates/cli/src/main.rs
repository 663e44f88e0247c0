//! `pmim`: simulate benchmark data, train and run the detector, sweep
//! hyperparameters.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numerical.

mod commands;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "pmim", version, about = "Fault detection by projections of the mutual information matrix")]
struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "PMIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a clean training series and a faulted test series.
    Simulate(SimulateArgs),
    /// Fit the detector on normal data and write model.json.
    Train(TrainArgs),
    /// Monitor a test series with a trained model and write trace.csv.
    Detect(DetectArgs),
    /// Score a grid of (alpha, sigma, window) settings on one train/test pair.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Scale {
    /// 3000 training / 2000 test samples, fault from sample 501.
    Desk,
    /// 10000 training / 4000 test samples, fault from sample 1001.
    Full,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Fault type: type1..type4 or its name (sensor_bias, gain_degradation,
    /// additive_process, dynamic_change).
    #[arg(long, default_value = "type1")]
    pub fault: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "desk")]
    pub scale: Scale,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// 1-based index of the first faulted test sample.
    #[arg(long)]
    pub onset: Option<usize>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// l2 norm, eta = 0.05.
    Synthetic,
    /// linf norm, eta = 0.02.
    Tep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    L2,
    Linf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatrixArg {
    Renyi,
    Covariance,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CenteringArg {
    MuStar,
    WindowMean,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    #[arg(long, default_value_t = 1.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 100)]
    pub window: usize,
    /// Overrides the preset's significance level.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Overrides the preset's scalarization norm.
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long, value_enum, default_value = "synthetic")]
    pub preset: Preset,
    #[arg(long, value_enum, default_value = "renyi")]
    pub matrix: MatrixArg,
    /// Spacing between training windows.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Centering of training-window moments.
    #[arg(long, value_enum, default_value = "window-mean")]
    pub centering: CenteringArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Normal-operation CSV.
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RootCauseMode {
    /// Rank variables per alarmed window.
    Window,
    /// Additionally rank from the MI matrix averaged over all alarmed
    /// windows (after the onset when given); writes root_cause.json.
    Segment,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// 1-based index of the first faulted sample; enables metrics.json.
    #[arg(long)]
    pub onset: Option<usize>,
    #[arg(long, value_enum, default_value = "window")]
    pub root_cause: RootCauseMode,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub onset: usize,
    /// Comma-separated orders, or `preset` for the 18-value grid.
    #[arg(long, default_value = "1.01")]
    pub alphas: String,
    /// Comma-separated kernel widths, or `preset` for the 15-value grid.
    #[arg(long, default_value = "0.5")]
    pub sigmas: String,
    /// Comma-separated window lengths, or `preset` for {80,100,120,150,180,200}.
    #[arg(long, default_value = "100")]
    pub windows: String,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long, value_enum, default_value = "synthetic")]
    pub preset: Preset,
    #[arg(long, value_enum, default_value = "renyi")]
    pub matrix: MatrixArg,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Sweep(a) => commands::sweep(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
