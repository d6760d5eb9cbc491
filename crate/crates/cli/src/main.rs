//! `courtloc` command-line interface.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use courtloc::Profile;

use crate::config::ConfigFile;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(courtloc::Error),
}

impl From<courtloc::Error> for CliError {
    fn from(e: courtloc::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_INPUT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) if e.is_numeric() => write!(f, "numeric failure: {e}"),
            CliError::Core(e) => write!(f, "input error: {e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "courtloc", version, about = "Court localization from floor-line images")]
pub struct Cli {
    /// Key/value config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Resolution profile: full (640x480) or reduced (320x240).
    #[arg(long, global = true)]
    pub profile: Option<Profile>,
    /// Increase log verbosity (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a labeled dataset and split it into train and test.
    Gen(GenArgs),
    /// Train the localization network on a dataset's training split.
    Train(TrainArgs),
    /// Report per-axis mean absolute error and MSE of a checkpoint.
    Eval(EvalArgs),
    /// Predict the court position for one image.
    Infer(InferArgs),
    /// Integrated Gradients saliency maps for one input.
    Attribute(AttributeArgs),
    /// Pearson correlation test with t-statistic and two-tailed p-value.
    Stats(StatsArgs),
    /// Multiply-accumulate counts of standard vs depthwise-separable convolution.
    Cost(CostArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of samples to render (at least 1).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: Option<u64>,
    /// Fraction of samples assigned to the training split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Seed of the split shuffle (defaults to --seed).
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Gaussian pixel noise, in gray levels.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Robot heading: `uniform` or a fixed angle in radians.
    #[arg(long)]
    pub yaw: Option<String>,
    /// Court definition file (defaults to the standard 15 m x 8 m court).
    #[arg(long, value_name = "FILE")]
    pub court: Option<PathBuf>,
    /// Preprocessing config file recorded into the manifest.
    #[arg(long, value_name = "FILE")]
    pub preprocess: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory or manifest file.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Comma-separated layer widths, e.g. 44800,256,64,2.
    #[arg(long)]
    pub layers: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset directory or manifest file.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Checkpoint file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Checkpoint file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Preprocessing config file.
    #[arg(long, value_name = "FILE")]
    pub preprocess: Option<PathBuf>,
    /// PPM image to localize.
    pub image: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    /// Checkpoint file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Dataset to draw the input from (with --index).
    #[arg(long, value_name = "PATH", conflicts_with = "image")]
    pub data: Option<PathBuf>,
    /// Sample index in manifest order.
    #[arg(long, requires = "data")]
    pub index: Option<usize>,
    /// PPM image to explain instead of a dataset sample.
    #[arg(long, value_name = "FILE")]
    pub image: Option<PathBuf>,
    /// Preprocessing config file used with --image.
    #[arg(long, value_name = "FILE")]
    pub preprocess: Option<PathBuf>,
    /// Riemann steps along the straight-line path.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Table2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Column {
    X,
    Y,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Built-in data set.
    #[arg(long, value_enum, conflicts_with_all = ["csv", "r"])]
    pub fixture: Option<Fixture>,
    /// Fixture loss column correlated against the iteration count.
    #[arg(long, value_enum, default_value_t = Column::Y)]
    pub column: Column,
    /// CSV of (x, y) pairs; a non-numeric first line is treated as a header.
    #[arg(long, value_name = "FILE", conflicts_with = "r")]
    pub csv: Option<PathBuf>,
    /// Test a given correlation coefficient directly (with --n).
    #[arg(long, allow_hyphen_values = true, requires = "n")]
    pub r: Option<f64>,
    /// Sample size for --r.
    #[arg(long, requires = "r")]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Kernel size.
    #[arg(long)]
    pub dk: u64,
    /// Input channels.
    #[arg(long)]
    pub m: u64,
    /// Output channels.
    #[arg(long)]
    pub n: u64,
    /// Output feature map size.
    #[arg(long)]
    pub df: u64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let global = commands::Global {
        seed: cfg.resolve(cli.seed, "seed", 0)?,
        out: cfg.resolve_opt(cli.out.clone(), "out")?,
        profile: cfg.resolve_opt(cli.profile, "profile")?,
    };
    match &cli.command {
        Command::Gen(a) => commands::gen(&global, &cfg, a),
        Command::Train(a) => commands::train(&global, &cfg, a),
        Command::Eval(a) => commands::eval(&global, a),
        Command::Infer(a) => commands::infer(&global, a),
        Command::Attribute(a) => commands::attribute(&global, &cfg, a),
        Command::Stats(a) => commands::stats(a),
        Command::Cost(a) => commands::cost(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("courtloc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
