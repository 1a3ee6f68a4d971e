//! `tmplex`: parse logs into templates, score groupings, time the parser and
//! build keyword libraries.
//!
//! Exit codes: 0 success, 2 usage, 3 data or format, 4 environment.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::InputFormat;

/// An error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        Self {
            code: 3,
            msg: e.to_string(),
        }
    }

    pub fn env(msg: impl Into<String>) -> Self {
        Self { code: 4, msg: msg.into() }
    }
}

impl From<tmplex_core::Error> for Failure {
    fn from(e: tmplex_core::Error) -> Self {
        use tmplex_core::Error as E;
        match e {
            E::MissingEnv(var) => Failure::env(format!(
                "environment variable {var} is not set; export it (and optionally {}) before using the http provider",
                tmplex_core::keywords::TOKEN_ENV
            )),
            E::Transport(_) => Failure::env(e.to_string()),
            E::InvalidConfig(_) => Failure::usage(e.to_string()),
            other => Failure::data(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tmplex", version, about = "Streaming log template extraction")]
struct Cli {
    /// INI file of `key = value` defaults; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Where to write the run manifest. `parse` defaults to
    /// OUTPUT/manifest.json; other commands write one only when asked.
    #[arg(long, global = true, value_name = "FILE")]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a log file into structured.csv and templates.json.
    Parse(ParseArgs),
    /// Score a predicted grouping against ground truth.
    Eval(EvalArgs),
    /// Time the parser on a generated corpus.
    Bench(BenchArgs),
    /// Build or inspect keyword libraries.
    #[command(subcommand)]
    Keywords(KeywordsCommand),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Keyword library, one phrase per line.
    #[arg(long, value_name = "FILE")]
    pub keywords: Option<PathBuf>,
    /// JSON list of masking rules replacing the defaults.
    #[arg(long, value_name = "FILE")]
    pub rules: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub output: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Exactly 39 distinct characters counted by the punctuation vector.
    #[arg(long, value_name = "CHARS")]
    pub punct_features: Option<String>,
    #[arg(long)]
    pub disable_keywords: bool,
    #[arg(long)]
    pub disable_index: bool,
    /// Also write a binary snapshot of the final template library.
    #[arg(long, value_name = "FILE")]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV with LineId and EventId columns.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    Keywords,
    Index,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 3000)]
    pub templates: usize,
    #[arg(long, default_value_t = 100_000)]
    pub logs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Components to switch off, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub ablate: Vec<Ablation>,
    #[arg(long, default_value_t = 0.2)]
    pub variable_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub length_jitter: f64,
    #[arg(long, default_value_t = 1000)]
    pub vocab: usize,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Also write the timing JSON here.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum KeywordsCommand {
    /// Load a library from a file or an extraction service and print it.
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Static,
    Http,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, value_enum)]
    pub provider: Provider,
    /// Keyword file for the static provider.
    #[arg(long, value_name = "FILE")]
    pub path: Option<PathBuf>,
    /// Log file to sample for the http provider.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Number of log lines sent to the service.
    #[arg(long, default_value_t = 200)]
    pub sample: usize,
    /// Maximum number of phrases kept.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Write the library here in the static-file format.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Directory caching raw service responses.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let global = commands::Global {
        config: cli.config,
        manifest: cli.manifest,
    };
    let result = match cli.command {
        Command::Parse(a) => commands::parse(&global, a),
        Command::Eval(a) => commands::eval(&global, a),
        Command::Bench(a) => commands::bench(&global, a),
        Command::Keywords(KeywordsCommand::Extract(a)) => commands::keywords_extract(&global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            if f.code == 2 {
                eprintln!("run `tmplex --help` for usage");
            }
            ExitCode::from(f.code)
        }
    }
}
