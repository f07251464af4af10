use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "transpref",
    version,
    about = "Preference-data curation and DPO fine-tuning for English to Slovene MT"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON config file; command-line flags take precedence over it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run seed; every module derives its own seed from it
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Stream JSONL progress events on stderr
    #[arg(long, global = true)]
    pub progress: bool,
    /// Upper bound on worker threads and concurrent requests
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate articles with two chat-completion backends
    Translate(TranslateArgs),
    /// Train the character n-gram language identifier
    TrainLangid(TrainLangidArgs),
    /// Build the preference dataset from dual translations
    Curate(CurateArgs),
    /// Fine-tune the toy policy with DPO
    TrainDpo(TrainDpoArgs),
    /// Compute per-model error rates and quality scores
    Evaluate(EvaluateArgs),
    /// Render a saved evaluation report
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Articles JSONL
    #[arg(long, value_name = "PATH")]
    pub articles: Option<PathBuf>,
    /// Translations JSONL; existing records are kept and skipped
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Backend as MODEL_ID=BASE_URL; replaces the backends from the config
    #[arg(long = "backend", value_name = "MODEL=URL")]
    pub backends: Vec<String>,
    /// Also write the run report here
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainLangidArgs {
    /// Labelled samples JSONL: {"text": ..., "label": ...}
    #[arg(long, value_name = "PATH")]
    pub corpus: Option<PathBuf>,
    /// Output profile JSON
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Shortest character n-gram
    #[arg(long)]
    pub min_n: Option<usize>,
    /// Longest character n-gram
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Number of hash buckets for n-gram features
    #[arg(long)]
    pub buckets: Option<u32>,
    /// Additive smoothing
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LanguageArgs {
    /// Language profile from train-langid
    #[arg(long, value_name = "PATH", conflicts_with = "lang_verdicts")]
    pub lang_profile: Option<PathBuf>,
    /// Precomputed language verdicts JSONL, one per translation
    #[arg(long, value_name = "PATH")]
    pub lang_verdicts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// proxy, http:<base-url> or cmd:<command line>
    #[arg(long, value_name = "SPEC", conflicts_with = "scores")]
    pub scorer: Option<String>,
    /// Precomputed quality scores JSONL
    #[arg(long, value_name = "PATH")]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Articles JSONL
    #[arg(long, value_name = "PATH")]
    pub articles: Option<PathBuf>,
    /// Translations JSONL, one record per article and model
    #[arg(long, value_name = "PATH")]
    pub translations: Option<PathBuf>,
    #[command(flatten)]
    pub language: LanguageArgs,
    #[command(flatten)]
    pub scoring: ScoreArgs,
    /// Directory for train.jsonl, val.jsonl, manifest.json and verdicts.jsonl
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Print the manifest without writing any files
    #[arg(long)]
    pub dry_run: bool,
    /// Language label the translations should carry
    #[arg(long)]
    pub target_language: Option<String>,
    /// A translation shorter than this fraction of the source is truncated
    #[arg(long)]
    pub truncation_ratio: Option<f64>,
    /// Minimum quality-score gap for a score-delta pair
    #[arg(long)]
    pub score_delta: Option<f64>,
    /// Target share of formatting pairs in the dataset
    #[arg(long)]
    pub formatting_fraction: Option<f64>,
    /// Target-language verdicts below this confidence count as foreign
    #[arg(long)]
    pub min_confidence: Option<f64>,
    /// Number of pairs held out for validation
    #[arg(long)]
    pub val_count: Option<usize>,
    /// Formatting prefix; repeat to give several (replaces the configured list)
    #[arg(long = "prefix", value_name = "TEXT")]
    pub prefixes: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainDpoArgs {
    /// Training pairs JSONL
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    /// Validation pairs JSONL
    #[arg(long, value_name = "PATH")]
    pub val: PathBuf,
    /// Directory for checkpoint.json, reference.json, train_log.jsonl and summary.json
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Alphabet file; every character is one token
    #[arg(long, value_name = "PATH")]
    pub alphabet: Option<PathBuf>,
    /// Add-k smoothing for the reference bigram fit
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    /// DPO temperature
    #[arg(long)]
    pub beta: Option<f64>,
    /// Learning rate at the end of warmup
    #[arg(long)]
    pub peak_lr: Option<f64>,
    /// Floor of the cosine decay
    #[arg(long)]
    pub min_lr: Option<f64>,
    /// Linear warmup length in optimizer steps
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Schedule horizon; defaults to epochs times steps per epoch
    #[arg(long)]
    pub total_steps: Option<usize>,
    /// Passes over the training pairs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Pairs per gradient computation
    #[arg(long)]
    pub micro_batch: Option<usize>,
    /// Pairs per optimizer step; a multiple of the micro batch
    #[arg(long)]
    pub global_batch: Option<usize>,
    /// Validation interval in optimizer steps
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Adapter rank
    #[arg(long)]
    pub rank: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Articles JSONL
    #[arg(long, value_name = "PATH")]
    pub articles: Option<PathBuf>,
    /// Translations JSONL, one record per article and model
    #[arg(long, value_name = "PATH")]
    pub translations: Option<PathBuf>,
    #[command(flatten)]
    pub language: LanguageArgs,
    #[command(flatten)]
    pub scoring: ScoreArgs,
    /// Skip quality scoring; only error rates are reported
    #[arg(long, conflicts_with_all = ["scorer", "scores"])]
    pub no_scores: bool,
    /// Write the full report as JSON
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write per-translation records as JSONL
    #[arg(long, value_name = "PATH")]
    pub records: Option<PathBuf>,
    /// Format of the table printed on stdout
    #[arg(long, default_value = "markdown")]
    pub format: transpref::eval::ReportFormat,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON written by evaluate --out
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
    /// markdown, json or csv
    #[arg(long, default_value = "markdown")]
    pub format: transpref::eval::ReportFormat,
    /// Write here instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
