use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod metrics;
mod settings;

#[derive(Debug, Parser)]
#[command(name = "snn", version, about = "Train and evaluate the multi-pathway spiking network")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Dataset to use.
    #[arg(long, global = true, default_value = "mnist", value_parser = ["mnist", "emnist-letters"])]
    pub dataset: String,
    /// Directory holding the IDX files.
    #[arg(long, global = true, default_value = "data/mnist")]
    pub data_dir: PathBuf,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the simulation (results do not depend on it).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a fresh network, calibrate its decoder and write a checkpoint.
    Train(TrainArgs),
    /// (Re)build the decoder of a trained checkpoint.
    Calibrate(CalibrateArgs),
    /// Classify a split with a calibrated checkpoint.
    Eval(EvalArgs),
    /// Accuracy under random neuron or synapse deletion.
    Ablate(AblateArgs),
    /// Average output spikes per iteration.
    Intensity(IntensityArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub size_sa: Option<usize>,
    /// Training iterations (one image each); defaults to one pass over the training set.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Fixed α for the whole run instead of the decaying schedule.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Calibrate on at most this many of the most recently trained images.
    #[arg(long, default_value_t = 10_000)]
    pub calib_limit: usize,
    /// Skip decoder calibration.
    #[arg(long)]
    pub no_calibrate: bool,
    /// Run a validation probe every N iterations.
    #[arg(long)]
    pub probe_every: Option<u64>,
    /// Images used by each probe for calibration and for validation.
    #[arg(long, default_value_t = 500)]
    pub probe_size: usize,
    /// Extra configuration overrides, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Use at most this many of the most recently trained images.
    #[arg(long, default_value_t = 10_000)]
    pub limit: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderArg {
    Vfa,
    Vfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Evaluate only the first N images of the split.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = DecoderArg::Vfa)]
    pub decoder: DecoderArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeleteTarget {
    Neurons,
    Synapses,
}

fn parse_rho(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("rho {v} outside [0, 1]"));
    }
    Ok(v)
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("alpha {v} outside [0, 1]"));
    }
    Ok(v)
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long = "delete", value_enum)]
    pub target: DeleteTarget,
    /// Comma-separated deletion probabilities.
    #[arg(long, value_delimiter = ',', value_parser = parse_rho, required = true)]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = DecoderArg::Vfa)]
    pub decoder: DecoderArg,
}

#[derive(Debug, Clone, Args)]
pub struct IntensityArgs {
    /// Measure a trained checkpoint in frozen mode.
    #[arg(long, conflicts_with = "alpha_sweep")]
    pub checkpoint: Option<PathBuf>,
    /// Samples to measure (checkpoint mode) or to evaluate after each sweep run.
    #[arg(long, default_value_t = 200)]
    pub limit: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Paired fresh trainings, one per α, reporting training-time intensity.
    #[arg(long, value_delimiter = ',', value_parser = parse_alpha)]
    pub alpha_sweep: Vec<f64>,
    /// Fixed α for a single fresh training run.
    #[arg(long, value_parser = parse_alpha, conflicts_with = "alpha_sweep")]
    pub alpha: Option<f64>,
    /// Training iterations per fresh run.
    #[arg(long, default_value_t = 200)]
    pub iterations: u64,
    #[arg(long)]
    pub size_sa: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&cli.global, &a),
        Command::Calibrate(a) => commands::calibrate(&cli.global, &a),
        Command::Eval(a) => commands::eval(&cli.global, &a),
        Command::Ablate(a) => commands::ablate(&cli.global, &a),
        Command::Intensity(a) => commands::intensity(&cli.global, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
