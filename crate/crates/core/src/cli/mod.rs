//! Command-line front end.
//!
//! Every subcommand builds a list of named reports. With `--out-dir` they
//! are written as files; otherwise the primary report goes to stdout.
//! Failures print a one-line JSON error to stderr and exit with 2 (config),
//! 3 (data) or 4 (computation).

mod commands;
mod provenance;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, ErrorKind};
use crate::records::LogFormat;

pub use provenance::Provenance;

#[derive(Debug, Parser)]
#[command(name = "econeval", version, about = "Economic evaluation of LLM systems from per-query logs")]
pub struct Cli {
    /// Directory for report files; created if missing. Without it the
    /// primary report is printed to stdout.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expected reward and metric breakdown of each candidate system.
    Evaluate(EvaluateArgs),
    /// Tune cascade thresholds on a train split and score them on the rest.
    TuneCascade(TuneArgs),
    /// Winning system over a grid of error and latency prices.
    Grid(GridArgs),
    /// Price of error at which one system overtakes another.
    Crossover(CrossoverArgs),
    /// Cascade error reduction across deferral thresholds.
    Cer(CerArgs),
    /// Decompose a two-model cascade's error rate.
    Decompose(DecomposeArgs),
    /// Pareto frontier of candidate systems.
    Pareto(ParetoArgs),
    /// Price of error implied by the cost and frequency of an adverse event.
    EstimatePoe(PoeArgs),
    /// Generate a synthetic evaluation log from model profiles.
    Synth(SynthArgs),
    /// Randomized self-checks of the decomposition and frontier results.
    VerifyTheorems(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct LogArgs {
    /// Per-query evaluation log.
    #[arg(long)]
    #[serde(skip)]
    pub log: PathBuf,
    /// `jsonl` or `csv`; inferred from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    #[serde(serialize_with = "serialize_format")]
    pub format: Option<LogFormat>,
}

fn parse_format(s: &str) -> Result<LogFormat, String> {
    s.parse()
}

fn serialize_format<S: serde::Serializer>(f: &Option<LogFormat>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(match f {
        None => "auto",
        Some(LogFormat::Jsonl) => "jsonl",
        Some(LogFormat::Csv) => "csv",
    })
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// Share of queries used for tuning.
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    /// Seed of the train/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quantile step of the threshold grid.
    #[arg(long, default_value_t = 0.025)]
    pub step: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// JSON array of candidate systems.
    #[arg(long)]
    #[serde(skip)]
    pub candidates: PathBuf,
    /// Scenario JSON.
    #[arg(long)]
    #[serde(skip)]
    pub scenario: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// Model ids from first to last, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub chain: Vec<String>,
    #[arg(long)]
    #[serde(skip)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Search every observed confidence instead of quantiles.
    #[arg(long)]
    pub full_resolution: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[command(flatten)]
    pub log: LogArgs,
    #[arg(long)]
    #[serde(skip)]
    pub candidates: PathBuf,
    /// Scenario supplying every price other than error and latency.
    #[arg(long)]
    #[serde(skip)]
    pub scenario: Option<PathBuf>,
    /// Dollars per error, comma separated; default $0.0001 to $10,000.
    #[arg(long, value_delimiter = ',')]
    pub error_prices: Option<Vec<String>>,
    /// Latency prices such as `0,1/min,10/min`; default 0 to $10/min.
    #[arg(long, value_delimiter = ',')]
    pub latency_prices: Option<Vec<String>>,
    /// Points per decade of the default error-price axis.
    #[arg(long, default_value_t = 4)]
    pub per_decade: usize,
    /// Re-tune cascades in every cell on a train split.
    #[arg(long)]
    pub tune: bool,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CrossoverArgs {
    #[command(flatten)]
    pub log: LogArgs,
    #[arg(long)]
    #[serde(skip)]
    pub candidates: PathBuf,
    /// Candidate id of the first system.
    #[arg(long)]
    pub a: String,
    /// Candidate id of the second system.
    #[arg(long)]
    pub b: String,
    #[arg(long)]
    #[serde(skip)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario's price of latency, e.g. `1/min`.
    #[arg(long)]
    pub latency_price: Option<String>,
    /// Points per decade of the $0.0001 to $10,000 scan.
    #[arg(long, default_value_t = 100)]
    pub per_decade: usize,
    #[arg(long)]
    pub tune: bool,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CerArgs {
    #[command(flatten)]
    pub log: LogArgs,
    /// Small and big model ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub chain: Vec<String>,
    /// Explicit thresholds; default is the quantile grid.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.025)]
    pub step: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub log: LogArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub chain: Vec<String>,
    #[arg(long)]
    pub threshold: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub log: LogArgs,
    #[arg(long)]
    #[serde(skip)]
    pub candidates: PathBuf,
    /// Objective columns to keep, e.g. `cost,latency,error_rate`.
    #[arg(long, value_delimiter = ',')]
    pub objectives: Option<Vec<String>>,
    /// Random price vectors for the reward-maximizer check.
    #[arg(long, default_value_t = 200)]
    pub lambda_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct PoeArgs {
    /// Mean dollar cost of the adverse event.
    #[arg(long)]
    pub mean_cost: f64,
    /// Probability that an event stems from an error.
    #[arg(long)]
    pub p_error_given_event: f64,
    /// Probability of the event per decision.
    #[arg(long)]
    pub p_event: f64,
    /// Probability of an error per decision.
    #[arg(long)]
    pub p_error: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// JSON array of model profiles.
    #[arg(long)]
    #[serde(skip)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub n_queries: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Queries per synthetic cascade log.
    #[arg(long, default_value_t = 200)]
    pub n_queries: usize,
}

/// A failure with its exit category.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Computation => 4,
        }
    }

    fn to_json(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Computation => "computation",
        };
        serde_json::json!({
            "error": { "kind": kind, "exit_code": self.exit_code(), "message": self.message }
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

/// Named report contents, primary first.
pub struct Outputs {
    pub reports: Vec<(String, Vec<u8>)>,
    /// Set when the run completed but found problems worth a nonzero exit.
    pub failure: Option<CliError>,
}

fn emit(outputs: &Outputs, out_dir: Option<&PathBuf>) -> Result<(), CliError> {
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
            for (name, bytes) in &outputs.reports {
                let path = dir.join(name);
                std::fs::write(&path, bytes)
                    .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(())
        }
        None => {
            let (_, bytes) = outputs.reports.first().expect("every command reports");
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::config(format!("cannot write to stdout: {e}")))
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let outputs = commands::execute(&cli.command)?;
    emit(&outputs, cli.out_dir.as_ref())?;
    match outputs.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
