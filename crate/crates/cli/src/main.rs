use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// Bad invocation: reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Multi-tier POS, disfluency and multi-word unit annotation of
/// time-aligned speech transcriptions.
#[derive(Debug, Parser)]
#[command(name = "speechtag", version)]
pub struct Cli {
    /// TOML file with the same keys as the long flags; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Resources {
    /// Lexicon file(s); defaults to $SPEECHTAG_RESOURCES/lexicon.tsv or the bundled sample.
    #[arg(long, value_name = "FILE")]
    pub lexicon: Vec<PathBuf>,
    /// Post-correction rule file.
    #[arg(long, value_name = "FILE")]
    pub rules: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub tokenizer_config: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub tokenizer_rules: Option<PathBuf>,
    /// Tier holding the orthographic transcription in TextGrid input.
    #[arg(long, value_name = "NAME")]
    pub transcription_tier: Option<String>,
    /// Tier naming the speaker of each stretch.
    #[arg(long, value_name = "NAME")]
    pub speaker_tier: Option<String>,
    /// Pause length (ms) that separates units.
    #[arg(long, value_name = "MS")]
    pub psu_threshold: Option<u32>,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct Training {
    #[arg(long, value_name = "N")]
    pub max_iterations: Option<usize>,
    /// Width of the Gaussian prior on the weights.
    #[arg(long, value_name = "SIGMA")]
    pub l2_sigma: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Annotate transcriptions and write all six tiers.
    Annotate {
        /// Input files or directories (.TextGrid, .tsv).
        #[arg(long = "in", value_name = "PATH")]
        inputs: Vec<PathBuf>,
        /// Directory with prelim.model, final.model and optional disfluency.model.
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Output format (textgrid or tsv); defaults to the input's.
        #[arg(long, value_name = "FORMAT")]
        format: Option<String>,
        #[command(flatten)]
        resources: Resources,
    },
    /// Train the statistical models on gold documents.
    Train {
        #[arg(long, value_name = "PATH")]
        gold: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        resources: Resources,
        #[command(flatten)]
        training: Training,
    },
    /// Cross-validate on gold documents and write a metrics report.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        gold: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        k: Option<usize>,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Report file; stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        resources: Resources,
        #[command(flatten)]
        training: Training,
    },
    /// Convert between TextGrid and TSV.
    Convert {
        #[arg(long = "in", value_name = "PATH")]
        inputs: Vec<PathBuf>,
        /// Target format: textgrid or tsv.
        #[arg(long, value_name = "FORMAT")]
        to: Option<String>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        resources: Resources,
    },
    /// Check tier congruence and print violations.
    Validate {
        #[arg(long = "in", value_name = "PATH")]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        resources: Resources,
    },
    /// Write a synthetic gold corpus as TSV files.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Approximate number of word tokens.
        #[arg(long, value_name = "N")]
        tokens: Option<usize>,
        #[arg(long, value_name = "N")]
        documents: Option<usize>,
        #[arg(long, value_name = "N")]
        strata: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
