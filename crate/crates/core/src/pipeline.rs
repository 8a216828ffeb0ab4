//! End-to-end experiments driven by an [`ExperimentConfig`].
//!
//! A run loads the corpus, optionally anonymizes it, drops rare labels,
//! splits it, resolves relation triples, trains the vanilla baseline and
//! one cascade per schedule, and evaluates the cascades in both modes. All
//! outputs are staged in a sibling directory and moved into place only when
//! the whole run succeeded. Reports carry no timestamps or paths, so
//! re-running a manifest's config reproduces them byte for byte.

use std::{
    collections::BTreeMap,
    fs,
    path::{Path, PathBuf},
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{
    anonymizer::{anonymize_corpus, LexiconSet},
    cascade::{
        evaluate_cascade, evaluate_classifier, search_schedules, train_cascade, train_vanilla, CascadeConfig, Mode,
        RelationSchedule, ScheduleResult, SearchConfig,
    },
    corpus::{
        filter_by_min_frequency, load_corpus, stratified_split, CorpusError, CorpusFormat, LabeledCorpus, SplitSpec,
    },
    metrics::{MetricReport, RankKey},
    ontology::{extract_all, load_snapshot, OntologySnapshot, Relation, RelationTriple, TranslationMap},
    synthetic,
};

/// Environment variable naming the root against which relative data paths
/// resolve.
pub const DATA_ROOT_ENV: &str = "DERMCASCADE_DATA";

/// Corpus path selecting the generated synthetic fixture, which also brings
/// its own snapshot and translation map.
pub const SYNTHETIC_CORPUS: &str = "builtin:synthetic";

pub const RUN_MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{what} not found at {path}")]
    MissingAsset { what: &'static str, path: String },
    #[error("output directory {0} already exists (set overwrite to replace it)")]
    OutputExists(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<crate::Error>,
    },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

fn stage<T, E: Into<crate::Error>>(name: &'static str, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Stage { stage: name, source: Box::new(e.into()) })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Corpus file, or [`SYNTHETIC_CORPUS`].
    pub corpus: String,
    /// Inferred from the extension when absent.
    pub format: Option<CorpusFormat>,
    /// Snapshot TSV; the shipped one when absent.
    pub snapshot: Option<PathBuf>,
    /// Translation TSV; the shipped one when absent.
    pub translation: Option<PathBuf>,
    /// Lexicon directory; the built-in lexicons when absent.
    pub lexicons: Option<PathBuf>,
    pub anonymize: bool,
    pub min_count: usize,
    pub k: usize,
    /// Schedules to train, as `sit,gr,t` strings. Ignored when `search`.
    pub schedules: Vec<String>,
    /// Pick the schedule by search on a validation split of the training set.
    pub search: bool,
    /// Mode used to score schedules during search.
    pub mode: Mode,
    pub rank_by: RankKey,
    pub train_fraction: f64,
    pub seed: u64,
    pub cascade: CascadeConfig,
    pub output: PathBuf,
    pub overwrite: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: SYNTHETIC_CORPUS.into(),
            format: None,
            snapshot: None,
            translation: None,
            lexicons: None,
            anonymize: false,
            min_count: 61,
            k: 2,
            schedules: vec!["t,sit,gr".into()],
            search: false,
            mode: Mode::PR,
            rank_by: RankKey::Accuracy,
            train_fraction: 0.8,
            seed: 42,
            cascade: CascadeConfig::default(),
            output: PathBuf::from("runs/latest"),
            overwrite: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Resolves relative paths against `root` (usually from
    /// [`DATA_ROOT_ENV`]).
    pub fn with_data_root(mut self, root: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        };
        if self.corpus != SYNTHETIC_CORPUS && Path::new(&self.corpus).is_relative() {
            self.corpus = root.join(&self.corpus).display().to_string();
        }
        for p in [&mut self.snapshot, &mut self.translation, &mut self.lexicons].into_iter().flatten() {
            fix(p);
        }
        self
    }

    /// Applies [`DATA_ROOT_ENV`] when set.
    pub fn with_env_data_root(self) -> Self {
        match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) if !root.is_empty() => self.with_data_root(Path::new(&root)),
            _ => self,
        }
    }

    pub fn parsed_schedules(&self) -> Result<Vec<RelationSchedule>, PipelineError> {
        self.schedules
            .iter()
            .map(|s| s.parse().map_err(|e| PipelineError::Config(format!("schedule {s:?}: {e}"))))
            .collect()
    }

    fn corpus_format(&self) -> Result<CorpusFormat, PipelineError> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        match Path::new(&self.corpus).extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Ok(CorpusFormat::Jsonl),
            Some("csv") => Ok(CorpusFormat::Csv),
            _ => Err(PipelineError::Config(format!(
                "cannot infer the format of {:?}; set format to jsonl or csv",
                self.corpus
            ))),
        }
    }

    /// Checks values and the presence of every referenced file before any
    /// work starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.min_count == 0 {
            return bad("min_count must be positive".into());
        }
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        if !self.search && self.schedules.is_empty() {
            return bad("give at least one schedule or enable search".into());
        }
        self.parsed_schedules()?;
        self.cascade.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.cascade.template.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.corpus != SYNTHETIC_CORPUS {
            self.corpus_format()?;
            require_file("corpus", Path::new(&self.corpus))?;
        }
        if let Some(p) = &self.snapshot {
            require_file("ontology snapshot", p)?;
        }
        if let Some(p) = &self.translation {
            require_file("translation map", p)?;
        }
        if let Some(p) = &self.lexicons {
            if !p.is_dir() {
                return Err(PipelineError::MissingAsset { what: "lexicon directory", path: p.display().to_string() });
            }
        }
        Ok(())
    }
}

fn require_file(what: &'static str, path: &Path) -> Result<(), PipelineError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(PipelineError::MissingAsset { what, path: path.display().to_string() })
    }
}

/// Corpus plus the ontology resources that go with it.
pub struct LoadedData {
    pub corpus: LabeledCorpus,
    pub snapshot: OntologySnapshot,
    pub translation: TranslationMap,
}

/// Loads the configured corpus, snapshot and translation map.
pub fn load_data(config: &ExperimentConfig) -> Result<LoadedData, PipelineError> {
    let (corpus, mut snapshot, mut translation) = if config.corpus == SYNTHETIC_CORPUS {
        let f = synthetic::reference_fixture();
        let tm = f.translation_map();
        (f.corpus, f.snapshot, tm)
    } else {
        let format = config.corpus_format()?;
        let c = stage("load", load_corpus(Path::new(&config.corpus), format))?;
        (c, OntologySnapshot::reference(), TranslationMap::reference())
    };
    if let Some(p) = &config.snapshot {
        snapshot = stage("load", load_snapshot(p))?;
    }
    if let Some(p) = &config.translation {
        translation = stage("load", TranslationMap::load(p))?;
    }
    let corpus = if config.anonymize {
        let lex = match &config.lexicons {
            Some(dir) => stage("anonymize", LexiconSet::load_dir(dir))?,
            None => LexiconSet::builtin(),
        };
        anonymize_corpus(&corpus, &lex)
    } else {
        corpus
    };
    Ok(LoadedData { corpus, snapshot, translation })
}

/// Metrics of one trained model on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    /// `vanilla` or `cascade`.
    pub model: String,
    pub schedule: Option<RelationSchedule>,
    pub mode: Option<Mode>,
    pub report: MetricReport,
}

impl ModelReport {
    /// Stem used for the report and confusion file names.
    pub fn file_stem(&self) -> String {
        match (&self.schedule, self.mode) {
            (Some(s), Some(m)) => {
                format!("cascade_{}_{m}", s.relations().iter().map(|r| r.as_str()).collect::<Vec<_>>().join("-"))
            }
            _ => self.model.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub documents: usize,
    pub labels: usize,
    pub documents_after_filter: usize,
    pub labels_after_filter: usize,
    pub train_documents: usize,
    pub test_documents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub data: DataSummary,
    pub triples: BTreeMap<String, RelationTriple>,
    pub schedules: Vec<RelationSchedule>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: PathBuf,
    pub manifest: RunManifest,
    pub reports: Vec<ModelReport>,
    pub search: Option<Vec<ScheduleResult>>,
}

/// Everything a run computes, before anything touches the disk.
pub struct Experiment {
    pub data: DataSummary,
    pub triples: BTreeMap<String, RelationTriple>,
    pub schedules: Vec<RelationSchedule>,
    pub reports: Vec<ModelReport>,
    pub search: Option<Vec<ScheduleResult>>,
}

/// Runs the experiment in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment, PipelineError> {
    config.validate()?;
    let loaded = load_data(config)?;
    let filtered = stage("filter", filter_by_min_frequency(&loaded.corpus, config.min_count))?;
    let split_spec = SplitSpec { train_fraction: config.train_fraction, seed: config.seed, stratified: true };
    let (train, test) = stage("split", stratified_split(&filtered, &split_spec))?;
    let triples = stage("relations", extract_all(filtered.labels(), &loaded.translation, &loaded.snapshot))?;
    log::info!(
        "{} documents, {} labels after filtering; train {}, test {}",
        filtered.len(),
        filtered.num_labels(),
        train.len(),
        test.len()
    );

    let mut reports = Vec::new();
    let vanilla = stage("train", train_vanilla(&train, &config.cascade))?;
    reports.push(ModelReport {
        model: "vanilla".into(),
        schedule: None,
        mode: None,
        report: stage("evaluate", evaluate_classifier(&vanilla, &test, config.k))?,
    });

    let (schedules, search) = if config.search {
        let inner_spec = SplitSpec { seed: config.seed.wrapping_add(1), ..split_spec };
        let (fit, validation) = stage("split", stratified_split(&train, &inner_spec))?;
        let search_cfg = SearchConfig {
            cascade: config.cascade.clone(),
            max_len: None,
            mode: config.mode,
            rank_by: config.rank_by,
            k: config.k,
        };
        let ranked = stage("search", search_schedules(&fit, &validation, &triples, Relation::ALL, &search_cfg))?;
        (vec![ranked[0].schedule.clone()], Some(ranked))
    } else {
        (config.parsed_schedules()?, None)
    };

    for schedule in &schedules {
        let model = stage("train", train_cascade(&train, &triples, schedule, &config.cascade))?;
        for mode in [Mode::OR, Mode::PR] {
            reports.push(ModelReport {
                model: "cascade".into(),
                schedule: Some(schedule.clone()),
                mode: Some(mode),
                report: stage("evaluate", evaluate_cascade(&model, &test, &triples, mode, config.k))?,
            });
        }
    }

    Ok(Experiment {
        data: DataSummary {
            documents: loaded.corpus.len(),
            labels: loaded.corpus.num_labels(),
            documents_after_filter: filtered.len(),
            labels_after_filter: filtered.num_labels(),
            train_documents: train.len(),
            test_documents: test.len(),
        },
        triples,
        schedules,
        reports,
        search,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

/// One row per model, for a compact overview of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub schedule: Option<String>,
    pub mode: Option<Mode>,
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub top_k_accuracy: f64,
    pub top_k_f1: f64,
}

/// Runs the experiment and writes its bundle to `config.output`.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<RunOutcome, PipelineError> {
    let output = config.output.clone();
    if output.exists() && !config.overwrite {
        return Err(PipelineError::OutputExists(output.display().to_string()));
    }
    let exp = run_experiment(config)?;

    let staging = staging_dir(&output);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| io_err(&staging, e))?;
    }
    let written = write_bundle(&staging, config, &exp);
    let manifest = match written {
        Ok(m) => m,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    if output.exists() {
        fs::remove_dir_all(&output).map_err(|e| io_err(&output, e))?;
    }
    fs::rename(&staging, &output).map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        io_err(&output, e)
    })?;
    Ok(RunOutcome { output, manifest, reports: exp.reports, search: exp.search })
}

fn staging_dir(output: &Path) -> PathBuf {
    let name = output.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    output.with_file_name(format!(".{name}.partial"))
}

fn write_bundle(dir: &Path, config: &ExperimentConfig, exp: &Experiment) -> Result<RunManifest, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), PipelineError> {
        let path = dir.join(&name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        files.push(name);
        Ok(())
    };
    let mut summary = Vec::new();
    for r in &exp.reports {
        let stem = r.file_stem();
        put(format!("report_{stem}.json"), to_json(r))?;
        put(format!("confusion_{stem}.csv"), r.report.confusion.to_csv())?;
        summary.push(SummaryRow {
            model: r.model.clone(),
            schedule: r.schedule.as_ref().map(|s| s.to_string()),
            mode: r.mode,
            accuracy: r.report.accuracy,
            micro_f1: r.report.micro_f1,
            macro_f1: r.report.macro_f1,
            top_k_accuracy: r.report.top_k_accuracy,
            top_k_f1: r.report.top_k_f1,
        });
    }
    put("summary.json".into(), to_json(&summary))?;
    if let Some(search) = &exp.search {
        put("search.json".into(), to_json(search))?;
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        data: exp.data.clone(),
        triples: exp.triples.clone(),
        schedules: exp.schedules.clone(),
        files: {
            let mut f = files.clone();
            f.push(RUN_MANIFEST.into());
            f
        },
    };
    let path = dir.join(RUN_MANIFEST);
    fs::write(&path, to_json(&manifest)).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Reads the manifest of a previous run.
pub fn load_manifest(path: &Path) -> Result<RunManifest, PipelineError> {
    let path = if path.is_dir() { path.join(RUN_MANIFEST) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

/// One threshold of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: usize,
    pub classes: usize,
    pub documents: usize,
    /// False when the threshold leaves too few classes to train on.
    pub feasible: bool,
    /// Cascade with gold relations (first configured schedule, OR mode).
    pub cascade_or: Option<MetricReport>,
    pub vanilla: Option<MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Class counts per threshold only, without training.
pub fn class_counts(corpus: &LabeledCorpus, thresholds: &[usize]) -> Vec<(usize, usize)> {
    let mut sorted = thresholds.to_vec();
    sorted.sort_unstable();
    sorted.into_iter().map(|t| (t, corpus.label_counts().values().filter(|&&c| c >= t).count())).collect()
}

/// Filters, retrains and evaluates at every threshold, in ascending order.
/// Thresholds that leave fewer than two classes produce infeasible rows.
pub fn threshold_sweep(config: &ExperimentConfig, thresholds: &[usize]) -> Result<Vec<SweepRow>, PipelineError> {
    let mut sorted = thresholds.to_vec();
    sorted.sort_unstable();
    if sorted.is_empty() || sorted[0] == 0 || sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(PipelineError::Config("thresholds must be positive and distinct".into()));
    }
    config.validate()?;
    let schedule = config
        .parsed_schedules()?
        .into_iter()
        .next()
        .unwrap_or_else(|| RelationSchedule::new(Relation::ALL.to_vec()).expect("full schedule"));
    let loaded = load_data(config)?;
    let spec = SplitSpec { train_fraction: config.train_fraction, seed: config.seed, stratified: true };

    let mut rows = Vec::with_capacity(sorted.len());
    for t in sorted {
        let filtered = match filter_by_min_frequency(&loaded.corpus, t) {
            Ok(c) => c,
            Err(CorpusError::NoClassesSurvive(_)) => {
                rows.push(infeasible(t, 0, 0, "no class reaches the threshold"));
                continue;
            }
            Err(e) => return Err(stage("filter", Err::<(), _>(e)).unwrap_err()),
        };
        if filtered.num_labels() < 2 {
            rows.push(infeasible(t, filtered.num_labels(), filtered.len(), "a single class remains"));
            continue;
        }
        let (train, test) = stage("split", stratified_split(&filtered, &spec))?;
        let triples = stage("relations", extract_all(filtered.labels(), &loaded.translation, &loaded.snapshot))?;
        let vanilla = stage("train", train_vanilla(&train, &config.cascade))?;
        let cascade = stage("train", train_cascade(&train, &triples, &schedule, &config.cascade))?;
        rows.push(SweepRow {
            threshold: t,
            classes: filtered.num_labels(),
            documents: filtered.len(),
            feasible: true,
            cascade_or: Some(stage("evaluate", evaluate_cascade(&cascade, &test, &triples, Mode::OR, config.k))?),
            vanilla: Some(stage("evaluate", evaluate_classifier(&vanilla, &test, config.k))?),
            note: None,
        });
    }
    Ok(rows)
}

fn infeasible(threshold: usize, classes: usize, documents: usize, note: &str) -> SweepRow {
    SweepRow {
        threshold,
        classes,
        documents,
        feasible: false,
        cascade_or: None,
        vanilla: None,
        note: Some(note.into()),
    }
}

/// Sweep rows as a table: threshold, classes, then accuracy, micro-F1,
/// macro-F1, top-k accuracy and top-k F1 for each model.
pub fn sweep_table_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "threshold", "classes", "accuracy", "micro_f1", "macro_f1", "top_k_accuracy", "top_k_f1"])
        .expect("in-memory write");
    for r in rows {
        for (name, rep) in [("A", &r.cascade_or), ("B", &r.vanilla)] {
            let cells: Vec<String> = match rep {
                Some(m) => [m.accuracy, m.micro_f1, m.macro_f1, m.top_k_accuracy, m.top_k_f1]
                    .iter()
                    .map(|v| format!("{v:.4}"))
                    .collect(),
                None => vec!["infeasible".into(); 5],
            };
            let mut rec = vec![name.to_string(), r.threshold.to_string(), r.classes.to_string()];
            rec.extend(cells);
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let c = ExperimentConfig {
            schedules: vec!["sit,gr,t".into(), "t".into()],
            min_count: 10,
            ..ExperimentConfig::default()
        };
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let partial = ExperimentConfig::from_toml("min_count = 5\n[cascade.train]\nepochs = 3\n").unwrap();
        assert_eq!(partial.min_count, 5);
        assert_eq!(partial.cascade.train.epochs, 3);
        assert_eq!(partial.k, 2);
        assert!(ExperimentConfig::from_toml("min_cuont = 5").is_err());
    }

    #[test]
    fn preflight_catches_missing_assets_and_bad_values() {
        let c = ExperimentConfig { snapshot: Some("/nonexistent/snap.tsv".into()), ..ExperimentConfig::default() };
        assert!(matches!(c.validate(), Err(PipelineError::MissingAsset { .. })));
        let c = ExperimentConfig { schedules: vec!["t,t".into()], ..ExperimentConfig::default() };
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
        let c = ExperimentConfig { k: 0, ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
        let c = ExperimentConfig { corpus: "notes.txt".into(), ..ExperimentConfig::default() };
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
    }

    #[test]
    fn data_root_applies_to_relative_paths() {
        let c = ExperimentConfig {
            corpus: "c.jsonl".into(),
            snapshot: Some("s.tsv".into()),
            lexicons: Some("/abs/lex".into()),
            ..ExperimentConfig::default()
        }
        .with_data_root(Path::new("/data"));
        assert_eq!(c.corpus, "/data/c.jsonl");
        assert_eq!(c.snapshot.unwrap(), PathBuf::from("/data/s.tsv"));
        assert_eq!(c.lexicons.unwrap(), PathBuf::from("/abs/lex"));
    }

    #[test]
    fn class_counts_are_antitone() {
        let f = synthetic::generate(&synthetic::SyntheticSpec { docs_per_disease: 3, ..Default::default() });
        let counts = class_counts(&f.corpus, &[4, 1, 3]);
        assert_eq!(counts, vec![(1, 25), (3, 25), (4, 0)]);
    }
}
