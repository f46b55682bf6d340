//! `helpfusion`: generate synthetic sessions, run the detectors, sweep the
//! learners over window sizes and render reports.
//!
//! Exit codes: 0 success, 1 usage or flag error, 2 data or validation error.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<helpfusion_core::Error> for CliError {
    fn from(e: helpfusion_core::Error) -> Self {
        match e {
            helpfusion_core::Error::Argument(_) => Self::usage(e.to_string()),
            _ => Self::data(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "helpfusion", version, about = "Late fusion of assistance detectors over sliding windows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate calibrated synthetic sessions and decision streams.
    Generate(GenerateArgs),
    /// Run the four detectors over session files and write a decisions CSV.
    Detect(DetectArgs),
    /// Run the window-size sweep and write records, summaries and curves.
    Sweep(SweepArgs),
    /// Render the F1 grid, AUC table and charts from a records CSV.
    Report(ReportArgs),
    /// Fit one learner at one window size and save the model as JSON.
    Train(TrainArgs),
    /// Score a decisions CSV with a saved model.
    Apply(ApplyArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional key = value config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Events per session.
    #[arg(long)]
    pub events: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stationary fraction of help-state events, in (0, 1).
    #[arg(long)]
    pub prevalence: Option<f64>,
    /// Correlation time of the latent help state, in events (at least 1).
    #[arg(long)]
    pub persistence: Option<f64>,
    /// Mean seconds between events.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Detector target as NAME=PRECISION,RECALL; repeatable.
    #[arg(long = "target", value_name = "NAME=P,R")]
    pub targets: Vec<String>,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Session JSON file or directory of session files.
    #[arg(long)]
    pub sessions: PathBuf,
    /// Output decisions CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Minimum robot-directed gaze dwell in seconds.
    #[arg(long)]
    pub min_dwell: Option<f64>,
    /// Seconds after a task action within which a gaze confirms it.
    #[arg(long)]
    pub confirm_window: Option<f64>,
    /// Comma-separated keyword list for the lexical detector.
    #[arg(long)]
    pub keywords: Option<String>,
    /// Task score for an action that neither progresses nor regresses.
    #[arg(long)]
    pub stall_score: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Decisions CSV to sweep over.
    #[arg(long, conflicts_with = "sessions", required_unless_present = "sessions")]
    pub decisions: Option<PathBuf>,
    /// Session files; the detectors run with default settings first.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Run directory for all outputs.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Desk-scale preset: windows 1..20, 100-tree forests, 5 iterations.
    #[arg(long)]
    pub quick: bool,
    /// Window sizes: `a..b`, `a..b:step` or a comma list.
    #[arg(long)]
    pub windows: Option<String>,
    /// `all`, `learners` or a comma list of algorithm tags.
    #[arg(long)]
    pub algos: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Random-forest size.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Maximum depth for trees and forest trees.
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub svm_gamma: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Records CSV written by `sweep`.
    #[arg(long)]
    pub records: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Columns of the F1 grid; defaults to 1,10,20,30,40,41,47,48,50.
    #[arg(long)]
    pub windows: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub decisions: PathBuf,
    #[arg(long)]
    pub window: usize,
    #[arg(long)]
    pub algo: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trees: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub decisions: PathBuf,
    /// Output CSV of `session_id,event_index,score,prediction`.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Detect(a) => commands::detect(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Report(a) => commands::report(&a),
        Command::Train(a) => commands::train(&a),
        Command::Apply(a) => commands::apply(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
