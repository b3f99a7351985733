//! `gaitmag`: simulate cohorts, track field logs, build datasets, train and
//! evaluate activity classifiers.

mod commands;
mod config;
mod lock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaitmag::logs::Modality;
use gaitnet::Architecture;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; nothing was written.
    Validation(String),
    /// Failure while reading data or running a stage.
    Runtime(String),
}

impl From<gaitmag::Error> for CliError {
    fn from(e: gaitmag::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "gaitmag",
    version,
    about = "Magnetic-tracking gait experiments"
)]
struct Cli {
    /// TOML experiment configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring configuration keys.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Master seed (`seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sensor modality, `magnetic` or `imu` (`modality`).
    #[arg(long, global = true, value_parser = parse_modality)]
    pub modality: Option<Modality>,
    /// Number of simulated subjects (`simulate.n_subjects`).
    #[arg(long, global = true)]
    pub subjects: Option<u32>,
    /// Recordings per subject and activity (`simulate.recordings_per_activity`).
    #[arg(long, global = true)]
    pub recordings: Option<u32>,
    /// Recording length in seconds (`simulate.duration_s`).
    #[arg(long, global = true)]
    pub duration: Option<f64>,
    /// Packet rate per receiver in Hz (`simulate.rate_hz`).
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Backpack effect on gait, 0 to 1 (`simulate.weight_effect`).
    #[arg(long, global = true)]
    pub weight_effect: Option<f64>,
    /// Disable all simulated noise, jitter and packet loss (`simulate.noise`).
    #[arg(long, global = true)]
    pub noiseless: bool,
    /// Window length, 600 or 500 samples (`preprocess.window_len`).
    #[arg(long, global = true)]
    pub window_len: Option<usize>,
    /// Low-pass the IMU channels too (`preprocess.lowpass_imu`).
    #[arg(long, global = true)]
    pub lowpass_imu: bool,
    /// Hold out whole subjects instead of windows (`preprocess.split.mode`).
    #[arg(long, global = true)]
    pub split_by_subject: bool,
    /// Classifier, `lstm` or `cnn` (`model.architecture`).
    #[arg(long, global = true, value_parser = parse_arch)]
    pub arch: Option<Architecture>,
    /// Training epochs (`train.epochs`).
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// Mini-batch size (`train.batch_size`).
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    /// Adam learning rate (`train.learning_rate`).
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Repeated training runs (`eval.runs`).
    #[arg(long, global = true)]
    pub runs: Option<usize>,
}

fn parse_modality(s: &str) -> Result<Modality, String> {
    s.parse()
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e: gaitnet::NnError| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort: packet logs for both modalities plus a manifest.
    Simulate {
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Also write raw field-space logs with ground truth under `field/`.
        #[arg(long)]
        field_log: bool,
    },
    /// Recover poses from a raw field log.
    Track {
        /// Field log CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a windowed, normalised, split dataset from a manifest.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on the training split and save its parameters.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated retraining on train + validation, scored on the test split.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Position-only, orientation-only and combined feature runs.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Magnetic versus IMU datasets; pairs are matched in the order given.
    Compare {
        #[arg(long, required = true)]
        magnetic: Vec<PathBuf>,
        #[arg(long, required = true)]
        imu: Vec<PathBuf>,
        /// Architectures to run; defaults to both.
        #[arg(long = "archs", value_parser = parse_arch, num_args = 1..)]
        archs: Vec<Architecture>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Simulate { out, field_log } => commands::simulate(&cfg, &out, field_log),
        Command::Track { input, out } => commands::track(&cfg, &input, &out),
        Command::Preprocess { manifest, out } => commands::preprocess(&cfg, &manifest, &out),
        Command::Train { dataset, out } => commands::train(&cfg, &dataset, &out),
        Command::Eval { dataset, out } => commands::eval(&cfg, &dataset, &out),
        Command::Ablate { dataset, out } => commands::ablate(&cfg, &dataset, &out),
        Command::Compare {
            magnetic,
            imu,
            archs,
            out,
        } => commands::compare(&cfg, &magnetic, &imu, &archs, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
