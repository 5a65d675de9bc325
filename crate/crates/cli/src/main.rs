//! `toxspan`: command-line pipelines for toxic span detection.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use toxspan::corpus::Split;
use toxspan::harness::{Objective, Setting};
use toxspan::lexicon::{InSpanRule, MatchMode};

#[derive(Parser)]
#[command(name = "toxspan", version, about = "Toxic span detection corpora, baselines and evaluation")]
struct Cli {
    /// Worker threads for grid search; all cores by default.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Root directory for relative input paths not found in the working directory.
    #[arg(long, global = true, env = "TOXSPAN_DATA", value_name = "DIR")]
    data_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a published corpus into the canonical JSONL format.
    Ingest(IngestArgs),
    /// Split composition and span coverage of a dataset.
    Stats(StatsArgs),
    /// Add non-toxic samples from a pool until each split is balanced.
    Balance(BalanceArgs),
    /// Induce a lexicon from the train split of a span-annotated dataset.
    BuildLexicon(BuildLexiconArgs),
    /// Predict spans with a lexicon or from token attribution scores.
    Predict(PredictArgs),
    /// Score span predictions against gold.
    Evaluate(EvaluateArgs),
    /// Grid-search one method on a dev split.
    Tune(TuneArgs),
    /// Run an in-domain and cross-domain experiment from a config file.
    Experiment(ExperimentArgs),
    /// Sample erroneous predictions into an annotation sheet.
    SampleErrors(SampleErrorsArgs),
    /// Error class prevalence from an annotated sheet.
    Prevalence(PrevalenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Semeval,
    Hatexplain,
    Canonical,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    format: Format,
    /// SemEval CSV of the train split.
    #[arg(long)]
    train: Option<PathBuf>,
    /// SemEval CSV of the dev split.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// SemEval CSV of the test split.
    #[arg(long)]
    test: Option<PathBuf>,
    /// HateXplain dataset.json, or a canonical dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// HateXplain post_id_divisions.json.
    #[arg(long)]
    divisions: Option<PathBuf>,
    /// Dataset name stored in the header; defaults to the format name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// CSV output; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Canonical dataset of non-toxic samples to draw from.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildLexiconArgs {
    /// Dataset whose train split is counted (all samples if it has none).
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    min_occ: usize,
    #[arg(long, default_value = "majority_chars")]
    in_span_rule: InSpanRule,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["lexicon", "train", "scores"])))]
struct PredictArgs {
    /// Dataset to predict on.
    #[arg(long)]
    dataset: PathBuf,
    /// Restrict to one split.
    #[arg(long)]
    split: Option<Split>,
    /// Lexicon or wordlist file.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Build a lexicon from this dataset's train split instead.
    #[arg(long, requires_all = ["theta", "min_occ"])]
    train: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    min_occ: Option<usize>,
    #[arg(long, default_value = "majority_chars")]
    in_span_rule: InSpanRule,
    /// Token attribution scores (JSONL).
    #[arg(long, requires = "tau")]
    scores: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long, default_value = "substring")]
    match_mode: MatchMode,
    #[arg(long, default_value_t = 0)]
    fill_chars: usize,
    /// Message-level predictions; non-toxic verdicts empty the spans.
    #[arg(long)]
    binary: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    pred: PathBuf,
    /// Gate the predictions with message-level predictions first.
    #[arg(long)]
    binary: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("method").args(["lexicon", "scores", "pred"])))]
struct TuneArgs {
    /// Dataset whose train split feeds the constructed lexicon.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Dataset whose dev split is tuned on (all samples if it has none);
    /// defaults to `--train`.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Tune a wordlist instead of a constructed lexicon.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Tune thresholds over attribution scores for the dev split.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Tune fill-chars only, over fixed span predictions.
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long, default_value = "substring")]
    match_mode: MatchMode,
    #[arg(long, default_value = "majority_chars")]
    in_span_rule: InSpanRule,
    #[arg(long, default_value = "oracle")]
    setting: Setting,
    /// Defaults to `toxic` for the oracle setting and `macro` otherwise.
    #[arg(long)]
    objective: Option<Objective>,
    /// Message-level predictions for the dev split (inferred setting).
    #[arg(long)]
    binary: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    fill_chars: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    min_occ: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    tau: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleErrorsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    split: Option<Split>,
    /// Span predictions, as `NAME=PATH` or `PATH`; repeat per method.
    #[arg(long, required = true)]
    pred: Vec<String>,
    #[arg(long, default_value_t = 15)]
    per_category: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrevalenceArgs {
    /// Annotated sheet written by `sample-errors`.
    #[arg(long)]
    sheet: PathBuf,
    /// `category_counts.csv` written by `sample-errors`.
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
