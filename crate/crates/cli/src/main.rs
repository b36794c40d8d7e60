//! `dptext`: differentially private text classification from the command
//! line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, TrainMode};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(message) | CliError::Data(message) => write!(f, "{message}"),
        }
    }
}

impl From<dptext_core::Error> for CliError {
    fn from(err: dptext_core::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "dptext",
    version,
    about = "Differentially private text classification: clean, featurize, train, evaluate, sweep"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClipModeArg {
    Batch,
    #[value(name = "per_example")]
    PerExample,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SigmaModeArg {
    Literal,
    Sensitivity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Dp,
    Baseline,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Count,
    Tfidf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Val => "val",
            SplitArg::Test => "test",
            SplitArg::All => "all",
        }
    }
}

/// Config file plus per-run overrides shared by train/evaluate/sweep.
#[derive(Args, Clone, Debug)]
struct PipelineArgs {
    /// Flat `key = value` config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cleaned corpus file.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Vocabulary file.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Model checkpoint path (output of train, input of evaluate).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Run-report path written by train (default: <model>.report.txt).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Metrics CSV the evaluate command appends to.
    #[arg(long = "metrics-out")]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-step privacy budget.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Gradient clipping norm C ("inf" disables clipping).
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long = "clip-mode", value_enum)]
    clip_mode: Option<ClipModeArg>,
    #[arg(long = "sigma-mode", value_enum)]
    sigma_mode: Option<SigmaModeArg>,
    /// Disable Gaussian noise (clipping still applies in dp mode).
    #[arg(long = "no-noise")]
    no_noise: bool,
    #[arg(long)]
    l2: Option<f64>,
    /// Stop training once spent epsilon would exceed this cap.
    #[arg(long = "epsilon-cap")]
    epsilon_cap: Option<f64>,
    #[arg(long = "delta-cap")]
    delta_cap: Option<f64>,
    /// dp (clip + noise + ledger) or baseline (plain gradient descent).
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Featurization scheme.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long = "split-seed")]
    split_seed: Option<u64>,
    /// Train/val/test fractions, e.g. 0.8,0.1,0.1.
    #[arg(long = "split-fractions", value_delimiter = ',', num_args = 3)]
    split_fractions: Option<Vec<f64>>,
    #[arg(long = "min-doc-freq")]
    min_doc_freq: Option<usize>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.apply_file(path)?;
        }
        if let Some(v) = &self.corpus {
            config.corpus = Some(v.clone());
        }
        if let Some(v) = &self.vocab {
            config.vocab = Some(v.clone());
        }
        if let Some(v) = &self.model {
            config.model = Some(v.clone());
        }
        if let Some(v) = &self.report {
            config.report = Some(v.clone());
        }
        if let Some(v) = &self.metrics_out {
            config.metrics_out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.epsilon {
            config.epsilon = v;
        }
        if let Some(v) = self.delta {
            config.delta = v;
        }
        if let Some(v) = self.clip {
            config.clip = v;
        }
        if let Some(v) = self.lr {
            config.lr = v;
        }
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.batch_size {
            config.batch_size = v;
        }
        if let Some(v) = self.clip_mode {
            config.clip_mode = match v {
                ClipModeArg::Batch => dptext_core::ClipMode::Batch,
                ClipModeArg::PerExample => dptext_core::ClipMode::PerExample,
            };
        }
        if let Some(v) = self.sigma_mode {
            config.sigma_mode = match v {
                SigmaModeArg::Literal => dptext_core::SigmaMode::Literal,
                SigmaModeArg::Sensitivity => dptext_core::SigmaMode::Sensitivity,
            };
        }
        if self.no_noise {
            config.noise = false;
        }
        if let Some(v) = self.l2 {
            config.l2 = v;
        }
        if let Some(v) = self.epsilon_cap {
            config.epsilon_cap = Some(v);
        }
        if let Some(v) = self.delta_cap {
            config.delta_cap = Some(v);
        }
        if let Some(v) = self.mode {
            config.mode = match v {
                ModeArg::Dp => TrainMode::Dp,
                ModeArg::Baseline => TrainMode::Baseline,
            };
        }
        if let Some(v) = self.scheme {
            config.scheme = match v {
                SchemeArg::Count => dptext_core::FeatureScheme::Count,
                SchemeArg::Tfidf => dptext_core::FeatureScheme::TfIdf,
            };
        }
        if let Some(v) = self.split_seed {
            config.split_seed = v;
        }
        if let Some(fractions) = &self.split_fractions {
            if fractions.len() != 3 {
                return Err(CliError::Usage(
                    "--split-fractions needs exactly three values".to_string(),
                ));
            }
            config.split = (fractions[0], fractions[1], fractions[2]);
        }
        if let Some(v) = self.min_doc_freq {
            config.min_doc_freq = v;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean a raw corpus: strip markup, tokenize, lemmatize, drop stopwords.
    Clean {
        /// Raw corpus file (one id/label/text record per line).
        #[arg(long)]
        corpus: PathBuf,
        /// Stopword file; defaults to the built-in English list.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Cleaned corpus output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a vocabulary file from a cleaned corpus.
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep tokens appearing in at least this many documents.
        #[arg(long = "min-doc-freq", default_value_t = 1)]
        min_doc_freq: usize,
    },
    /// Train a classifier on the train split (differentially private by
    /// default) and write a checkpoint plus a run report.
    Train(PipelineArgs),
    /// Evaluate a checkpoint on a corpus split and emit the metrics row.
    Evaluate {
        #[command(flatten)]
        args: PipelineArgs,
        /// Which split to evaluate.
        #[arg(long, value_enum)]
        split: SplitArg,
    },
    /// Train one model per (epsilon, seed) plus a no-noise baseline per
    /// seed, evaluating each on the test split into a CSV.
    Sweep {
        #[command(flatten)]
        args: PipelineArgs,
        /// Comma-separated epsilon list, e.g. 0.5,1,4.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// Comma-separated seed list; defaults to the configured seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Sweep CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Clean {
            corpus,
            stopwords,
            out,
        } => commands::cmd_clean(&corpus, stopwords.as_deref(), &out),
        Command::Vocab {
            corpus,
            out,
            min_doc_freq,
        } => commands::cmd_vocab(&corpus, &out, min_doc_freq),
        Command::Train(args) => {
            let config = args.resolve()?;
            commands::cmd_train(&config)
        }
        Command::Evaluate { args, split } => {
            let config = args.resolve()?;
            commands::cmd_evaluate(&config, split)
        }
        Command::Sweep {
            args,
            epsilons,
            seeds,
            out,
        } => {
            let config = args.resolve()?;
            let seeds = seeds.unwrap_or_else(|| vec![config.seed]);
            commands::cmd_sweep(&config, &epsilons, &seeds, &out)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            std::process::exit(1);
        }
        Err(CliError::Data(message)) => {
            eprintln!("error: {message}");
            std::process::exit(2);
        }
    }
}
