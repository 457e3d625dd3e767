//! `dcevae` command line: `prepare`, `train`, `report`, `theory`, `diff`.
//!
//! Anything that changes results lives in JSON (train configs, SCM and
//! linear-model specs); flags only pick files and modes.

mod diff;
mod prepare;
mod report;
mod theory;
mod train;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use prepare::{DataInfo, ScmTruth, DATA_INFO_FILE, TEST_FRACTION, TRUTH_FILE};

/// Exit status for numerical failures (non-finite loss, singular matrix,
/// non-convergence).
pub const EXIT_NUMERICAL: i32 = 1;
/// Exit status for I/O, parse and usage errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dcevae",
    version,
    about = "Counterfactual fairness with disentangled causal-effect VAEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a dataset into train/test CSV files with JSON sidecars.
    Prepare(PrepareArgs),
    /// Train a model and write a checkpoint and loss history.
    Train(TrainArgs),
    /// Effect report for real data or a trained model.
    Report(ReportArgs),
    /// Covariance report: closed form vs oracle, or a trained model's latents.
    Theory(TheoryArgs),
    /// Compare two reports produced under the same config.
    Diff(DiffArgs),
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["adult", "scm"])))]
pub struct PrepareArgs {
    /// Raw UCI Adult file.
    #[arg(long)]
    pub adult: Option<PathBuf>,
    /// SCM spec JSON, or `default`.
    #[arg(long)]
    pub scm: Option<String>,
    /// Records to draw from the SCM.
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    Real,
    Truth,
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Without a checkpoint the report describes the real data.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// CE reference table; defaults to `truth` when the data has one.
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    /// Data directory whose `test` split is compared to the real one by χ².
    #[arg(long)]
    pub generated: Option<PathBuf>,
    /// Also write the test split's counterfactual records.
    #[arg(long)]
    pub emit_counterfactuals: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["spec", "checkpoint"])))]
pub struct TheoryArgs {
    /// Linear-model spec JSON, or `random:<n>,<m>,<beta>`.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, requires = "data")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Seed for random specs and latent draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct DiffArgs {
    pub left: PathBuf,
    pub right: PathBuf,
}

pub fn run(cli: Cli) -> crate::Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare::run(&a),
        Command::Train(a) => train::run(&a),
        Command::Report(a) => report::run(&a),
        Command::Theory(a) => theory::run(&a),
        Command::Diff(a) => diff::run(&a),
    }
}

/// Prints a line to stdout, ignoring a closed pipe.
pub(crate) fn say(text: impl std::fmt::Display) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
