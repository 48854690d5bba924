//! Command-line front end: training, evaluation, embedding export, and
//! geometry reports.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data or I/O
//! error, 4 nothing to report (no ranking groups, no positive pairs, empty
//! evaluation set).

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "listdistill",
    version,
    about = "Train and evaluate ranking-distilled sentence encoders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a student encoder against one or two frozen teachers.
    Train(TrainArgs),
    /// Spearman correlation of cosine predictions on labeled pair files.
    EvalSts(EvalStsArgs),
    /// Mean Kendall tau and NDCG over per-sentence ranking groups.
    EvalRank(EvalRankArgs),
    /// Write dropout-free student embeddings in the teacher file format.
    ExportEmbeddings(ExportArgs),
    /// Alignment and uniformity of the student's embeddings.
    ReportGeometry(GeometryArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Teacher embedding file; give twice to blend two teachers.
    #[arg(long = "teacher")]
    pub teachers: Vec<PathBuf>,
    /// Labeled pairs used for checkpoint selection.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run report path; defaults to the checkpoint path plus `.report`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `listnet` or `listmle`.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalStsArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long = "sts", required = true)]
    pub sts: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalRankArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub sts: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub sts: PathBuf,
    /// Pairs with gold at or above this score count as positives.
    #[arg(long, default_value_t = 4.0)]
    pub align_threshold: f64,
    /// Optional TSV of cosine-similarity counts per gold bucket.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
}

/// A command failure, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
    Empty(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Empty(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) | Self::Data(m) | Self::Empty(m) => f.write_str(m),
        }
    }
}

impl From<listdistill::Error> for Failure {
    fn from(e: listdistill::Error) -> Self {
        use listdistill::Error as E;
        match e {
            E::Config(_)
            | E::NonPositiveTemperature(_)
            | E::AlphaOutOfRange(_)
            | E::InvalidWeight { .. }
            | E::BatchTooSmall { .. } => Self::Config(e.to_string()),
            E::EmptyInput | E::PoolTooSmall { .. } | E::DegenerateInput(_) => {
                Self::Empty(e.to_string())
            }
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Train(a) => commands::train(&a, out),
        Command::EvalSts(a) => commands::eval_sts(&a, out),
        Command::EvalRank(a) => commands::eval_rank(&a, out),
        Command::ExportEmbeddings(a) => commands::export_embeddings(&a, out),
        Command::ReportGeometry(a) => commands::report_geometry(&a, out),
    }
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return u8::try_from(e.exit_code()).unwrap_or(2);
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli.command, &mut lock) {
        Ok(()) => 0,
        Err(f) => {
            let _ = lock.flush();
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

/// Fixed five-decimal rendering; negative zero prints as zero.
pub fn fmt5(x: f64) -> String {
    format!("{:.5}", x + 0.0)
}
