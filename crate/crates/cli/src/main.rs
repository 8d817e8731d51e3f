mod commands;
mod error;
mod model_arg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::{code, CliError, CliResult};

/// Group out-of-distribution detection by codelength comparison.
#[derive(Debug, Parser)]
#[command(name = "mdlood", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the frozen statistics from training latents and residuals.
    Train(TrainArgs),
    /// Score one test batch.
    Detect(DetectArgs),
    /// Score batches from two classes and report the ROC.
    Eval(EvalArgs),
    /// Sample a matrix file from a Gaussian model.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SelectionArgs {
    /// Penalty grid as `lo,hi,count`, log-spaced.
    #[arg(long, default_value = "0.1,1,20")]
    lambda_grid: String,
    /// Graph description-length coder.
    #[arg(long, default_value = "edge-count")]
    graph_coder: String,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    latents: PathBuf,
    #[arg(long)]
    residuals: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Accepted for symmetry with the other commands; training is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    detector: PathBuf,
    #[arg(long)]
    latents: PathBuf,
    /// Without residuals only the latent codelengths are compared.
    #[arg(long)]
    residuals: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    detector: PathBuf,
    #[arg(long)]
    in_latents: PathBuf,
    #[arg(long, requires = "out_residuals")]
    in_residuals: Option<PathBuf>,
    #[arg(long)]
    out_latents: PathBuf,
    #[arg(long, requires = "in_residuals")]
    out_residuals: Option<PathBuf>,
    #[arg(long)]
    batch_size: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON summary; scores and ROC points go next to it as CSV.
    #[arg(long)]
    report: PathBuf,
    /// Free-form label of the shift the out-class represents.
    #[arg(long)]
    shift_spec: Option<String>,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// `ggm:dim=D,density=P,pcor=R[,graph-seed=G]`, `precision:PATH` or `iid:dim=D[,mean=MU][,var=V]`.
    #[arg(long)]
    model: String,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Shift applied to the model before sampling, e.g. `correlation-permute`.
    #[arg(long)]
    shift: Option<String>,
    /// Seed of random shifts, independent of the sampling seed.
    #[arg(long, default_value_t = 0)]
    shift_seed: u64,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("MDLOOD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::parse(format!("MDLOOD_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::new(code::OTHER, format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::PARSE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
