//! Command-line front end for `dermcascade`.
//!
//! Every subcommand that touches a corpus accepts the same data flags
//! (`--config`, `--corpus`, `--snapshot`, ...). A TOML config supplies
//! defaults and explicit flags override it. Relative data paths resolve
//! against `$DERMCASCADE_DATA` when that variable is set.

mod commands;
pub mod pipe;
pub mod server;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dermcascade::{
    cascade::Mode,
    corpus::CorpusFormat,
    learner::{ClassifierBackend, Optimizer},
    metrics::RankKey,
    ontology::SeverityPrecedence,
};

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "dermcascade", version, about = "Cascaded pathology classification for Spanish dermatology notes")]
pub struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask digits, names, places and titled names in a corpus.
    Anonymize(AnonymizeArgs),
    /// Draw a stratified review sample split between two reviewers.
    ReviewSample(ReviewSampleArgs),
    /// Serve the review API (and optionally the UI bundle).
    ServeReview(ServeReviewArgs),
    /// Resolve pathology labels to (type, severity, site) triples.
    ExtractRelations(ExtractArgs),
    /// Train a cascade for one schedule and save it as a bundle.
    TrainCascade(TrainCascadeArgs),
    /// Train and score a cascade for every relation schedule.
    SearchSchedules(SearchArgs),
    /// Predict diseases with a saved cascade.
    Infer(InferArgs),
    /// Score ranked predictions against a labeled corpus.
    Evaluate(EvaluateArgs),
    /// Retrain and evaluate at several class-frequency thresholds.
    ThresholdSweep(SweepArgs),
    /// Run a full experiment and write its report bundle.
    Run(RunArgs),
    /// Write the synthetic fixture (corpus, snapshot, translation map).
    GenerateFixture(FixtureArgs),
    /// Serve the external-classifier protocol on stdin/stdout.
    #[command(hide = true)]
    PipeClassifier(PipeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// TOML experiment config providing defaults for every other flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus file (.jsonl or .csv) or `builtin:synthetic`.
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<CorpusFormat>,
    /// Ontology snapshot TSV.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Spanish label to English concept TSV.
    #[arg(long)]
    pub translation: Option<PathBuf>,
    /// Lexicon directory for anonymization.
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// Anonymize the corpus before anything else.
    #[arg(long)]
    pub anonymize: bool,
    /// Minimum examples per label.
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Seed for splits and sampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ranking depth for top-k metrics.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<Optimizer>,
    /// Seed for weight updates.
    #[arg(long)]
    pub train_seed: Option<u64>,
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Command line of an external classifier speaking the JSON-lines
    /// protocol; replaces the built-in learner.
    #[arg(long)]
    pub external_classifier: Option<String>,
}

impl TrainArgs {
    fn backend(&self, base: ClassifierBackend) -> ClassifierBackend {
        if let Some(cmd) = &self.external_classifier {
            return ClassifierBackend::External { command: cmd.split_whitespace().map(String::from).collect() };
        }
        match (base, self.max_features) {
            (ClassifierBackend::Linear { .. }, Some(max_features)) => ClassifierBackend::Linear { max_features },
            (b, _) => b,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnonymizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<CorpusFormat>,
    #[arg(long)]
    pub output: PathBuf,
    /// Lexicon directory; built-in lexicons when absent.
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// JSON-lines audit of the rules applied to each record.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReviewSampleArgs {
    /// Anonymized corpus.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<CorpusFormat>,
    /// Share of the corpus to review.
    #[arg(long, default_value_t = 0.1)]
    pub fraction: f64,
    /// Share of the sample both reviewers see.
    #[arg(long, default_value_t = 0.126)]
    pub overlap: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Partition JSON to write.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeReviewArgs {
    #[arg(long)]
    pub partition: PathBuf,
    /// Append-only verdict log (JSON lines).
    #[arg(long, default_value = "verdicts.jsonl")]
    pub store: PathBuf,
    /// The two reviewer ids; the first gets subset A.
    #[arg(long, value_delimiter = ',', default_value = "revisor-a,revisor-b")]
    pub reviewers: Vec<String>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Static UI bundle served at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
    /// Corpus of original texts. When given, items also carry the
    /// pre-anonymization text; off by default.
    #[arg(long)]
    pub originals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Labels to resolve; the corpus labels when absent.
    #[arg(long = "label")]
    pub labels: Vec<String>,
    #[arg(long, value_parser = parse_precedence, default_value = "strongest-wins")]
    pub precedence: SeverityPrecedence,
    /// JSON map label -> triple; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainCascadeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Relation order, e.g. `sit,gr,t`.
    #[arg(long, default_value = "t,sit,gr")]
    pub schedule: String,
    /// Mode used for the held-out evaluation and recorded as the bundle
    /// default.
    #[arg(long, value_parser = parse_mode, default_value = "PR")]
    pub mode: Mode,
    /// Bundle directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 3)]
    pub max_len: usize,
    /// Relations to schedule.
    #[arg(long, value_delimiter = ',', default_value = "t,gr,sit")]
    pub relations: Vec<String>,
    #[arg(long, value_parser = parse_mode, default_value = "PR")]
    pub mode: Mode,
    #[arg(long, value_parser = parse_rank_key, default_value = "accuracy")]
    pub rank_by: RankKey,
    /// Ranked results as JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub bundle: PathBuf,
    /// Defaults to the mode recorded in the bundle.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Gold relations for OR mode with `--text`, e.g.
    /// `t=precancer,gr=inofensivo,sit=piel`.
    #[arg(long)]
    pub triple: Option<String>,
    /// One report to classify.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    /// Corpus to classify in batch; OR mode takes each record's triple
    /// from its label.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Predictions as JSON lines; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Labeled corpus with the true labels.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<CorpusFormat>,
    /// Predictions as JSON lines `{"id":..,"ranked":[..]}`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Report JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Confusion matrix CSV.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, value_delimiter = ',', default_value = "2,10,25,50,61,75,100")]
    pub thresholds: Vec<usize>,
    /// Only count surviving classes, no training.
    #[arg(long)]
    pub counts_only: bool,
    /// Schedule of the cascade (model A).
    #[arg(long)]
    pub schedule: Option<String>,
    /// Rows as JSON; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rows as a CSV table.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Re-run the config recorded in a previous run's manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    /// Schedules to train (repeatable).
    #[arg(long = "schedule")]
    pub schedules: Vec<String>,
    /// Choose the schedule by search instead.
    #[arg(long)]
    pub search: bool,
    /// Mode used to score schedules during search.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long, value_parser = parse_rank_key)]
    pub rank_by: Option<RankKey>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipeArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Persist fitted models here so later processes can serve them.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_rank_key(s: &str) -> Result<RankKey, String> {
    s.parse()
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    match s.to_ascii_lowercase().as_str() {
        "adam" => Ok(Optimizer::Adam),
        "sgd" => Ok(Optimizer::Sgd),
        other => Err(format!("unknown optimizer {other:?} (adam, sgd)")),
    }
}

fn parse_precedence(s: &str) -> Result<SeverityPrecedence, String> {
    match s {
        "strongest-wins" => Ok(SeverityPrecedence::StrongestWins),
        "check-order" => Ok(SeverityPrecedence::CheckOrder),
        other => Err(format!("unknown precedence {other:?} (strongest-wins, check-order)")),
    }
}
