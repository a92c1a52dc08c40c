//! `vocscan`: synthetic data generation, training, scanning, detection and
//! evaluation from one manifest.

mod commands;
mod layout;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::layout::Layout;

#[derive(Debug, Parser)]
#[command(name = "vocscan", version, about = "Sliding-window VOC detection in GC-MS runs")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Study manifest; defaults to `<out>/manifest.toml`.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Overrides the manifest seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "VOCSCAN_OUT", default_value = "vocscan-out")]
    pub out: PathBuf,
    /// Worker threads for window scanning.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Augment {
    /// Translations and intensity variants.
    Full,
    /// Translations only.
    Shifts,
    /// Centred windows only.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    Convnet,
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Overlap,
    PeakInDi,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    /// Augmentation applied to the annotated windows; defaults to full when
    /// the manifest asks for intensity variants, otherwise shifts.
    #[arg(long, value_enum)]
    pub augment: Option<Augment>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    /// Restrict to these sample ids (repeatable); defaults to the test split.
    #[arg(long = "sample")]
    pub samples: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic study and its manifest.
    Gen {
        #[arg(long, default_value_t = 10)]
        templates: usize,
        #[arg(long, default_value_t = 30)]
        train: usize,
        #[arg(long, default_value_t = 10)]
        test: usize,
        /// Rows per sample.
        #[arg(long, default_value_t = 22_500)]
        rows: usize,
        /// m/z channels per row.
        #[arg(long, default_value_t = 411)]
        channels: usize,
        /// Probability that a compound is present in a sample.
        #[arg(long, default_value_t = 0.8)]
        presence: f64,
        /// Untargeted background compounds; they add signal but no annotations.
        #[arg(long, default_value_t = 20)]
        background: usize,
        /// Probability that a background compound is present in a sample.
        #[arg(long, default_value_t = 0.5)]
        background_presence: f64,
        /// Intensity variants written to the manifest parameters.
        #[arg(long, default_value_t = 0)]
        intensity_variants: usize,
    },
    /// Build the augmented training set and write it to a binary cache.
    Extract {
        #[command(flatten)]
        augment: AugmentArgs,
    },
    /// Print the size of the augmented training set without building it.
    Augment {
        #[command(flatten)]
        augment: AugmentArgs,
        /// Count for this many originals instead of the manifest annotations.
        #[arg(long)]
        originals: Option<usize>,
    },
    /// Train a window classifier.
    Train {
        #[arg(long, value_enum, default_value_t = ModelChoice::Convnet)]
        model: ModelChoice,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        /// Train from a cache written by `extract` instead of the manifest samples.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        augment: AugmentArgs,
        /// TOML file with a full network configuration; overrides --epochs.
        #[arg(long)]
        net_config: Option<PathBuf>,
    },
    /// Label every window and record the wall time per sample.
    Scan {
        #[command(flatten)]
        samples: SampleArgs,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Scan and apply the duration, order and uniqueness rules.
    Detect {
        #[command(flatten)]
        samples: SampleArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Minimum run length; defaults to the manifest value.
        #[arg(long)]
        gamma: Option<usize>,
    },
    /// Score detections against the annotations of the test split.
    Eval {
        #[arg(long, value_enum, default_value_t = Rule::Overlap)]
        rule: Rule,
        /// Output directories of other runs; with two or more, their
        /// detections are intersected and evaluated instead of this run's.
        #[arg(long = "intersect")]
        intersect: Vec<PathBuf>,
    },
    /// Summarize training, timing and evaluation of one or more runs.
    Report {
        /// Additional run directories to compare against.
        runs: Vec<PathBuf>,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

/// Exit status and category of a failure.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    use vocscan_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Contract(_) => (3, "contract"),
                E::Parse(_) => (4, "parse"),
                E::Validation { .. } => (4, "validation"),
                E::Config(_) => (2, "config"),
                E::Io(_) => (5, "io"),
                E::Bounds { .. } | E::Extraction(_) | E::Sampling(_) => (6, "data"),
                E::Training(_) => (7, "training"),
                E::Split(_) => (2, "split"),
                E::Format(_) => (4, "format"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (5, "io");
        }
    }
    (1, "error")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.run.verbose);
    let layout = Layout::new(&cli.run);
    match commands::run(&cli.command, &cli.run, &layout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            eprintln!("error[{kind}]: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::from(code)
        }
    }
}
