use std::{
    collections::BTreeMap,
    fs,
    io::{BufRead, BufReader, Write},
    path::Path,
    sync::Arc,
};

use anyhow::{anyhow, bail, Context, Result};
use dermcascade::{
    anonymizer::{anonymize_document, generate_review_partition, LexiconSet, ReviewPartition},
    cascade::{
        evaluate_cascade, infer_cascade, load_bundle, save_bundle, search_schedules, train_cascade, CascadePrediction,
        Mode, RelationSchedule, SearchConfig,
    },
    corpus::{
        filter_by_min_frequency, load_corpus, stratified_split, write_corpus, ClinicalRecord, CorpusFormat,
        LabeledCorpus, SplitSpec,
    },
    learner::Scored,
    metrics::{evaluate_single_label, MetricReport},
    ontology::{extract_all, extract_relations_with, Relation, RelationTriple},
    pipeline::{
        class_counts, load_data, load_manifest, run_pipeline, sweep_table_csv, threshold_sweep, ExperimentConfig,
        LoadedData,
    },
    review::{ReviewSession, VerdictStore},
    synthetic,
};
use serde::{Deserialize, Serialize};

use crate::{
    AnonymizeArgs, Cli, Command, DataArgs, EvaluateArgs, ExtractArgs, FixtureArgs, InferArgs, PipeArgs,
    ReviewSampleArgs, RunArgs, SearchArgs, ServeReviewArgs, SweepArgs, TrainArgs, TrainCascadeArgs,
};

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Anonymize(a) => anonymize(a),
        Command::ReviewSample(a) => review_sample(a),
        Command::ServeReview(a) => serve_review(a),
        Command::ExtractRelations(a) => extract_relations(a),
        Command::TrainCascade(a) => train(a),
        Command::SearchSchedules(a) => search(a),
        Command::Infer(a) => infer(a),
        Command::Evaluate(a) => evaluate(a),
        Command::ThresholdSweep(a) => sweep(a),
        Command::Run(a) => run_experiment(a),
        Command::GenerateFixture(a) => generate_fixture(a),
        Command::PipeClassifier(a) => pipe_classifier(a),
    }
}

fn format_for(path: &Path, explicit: Option<CorpusFormat>) -> Result<CorpusFormat> {
    if let Some(f) = explicit {
        return Ok(f);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => Ok(CorpusFormat::Jsonl),
        Some("csv") => Ok(CorpusFormat::Csv),
        _ => bail!("cannot infer the format of {}; pass --format jsonl|csv", path.display()),
    }
}

fn read_corpus_file(path: &Path, format: Option<CorpusFormat>) -> Result<LabeledCorpus> {
    let f = format_for(path, format)?;
    load_corpus(path, f).with_context(|| format!("loading {}", path.display()))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Config file (if any), then flags, then the data root.
fn experiment_config(data: &DataArgs, train: Option<&TrainArgs>) -> Result<ExperimentConfig> {
    let mut c = match &data.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &data.corpus {
        c.corpus = v.clone();
    }
    if data.format.is_some() {
        c.format = data.format;
    }
    if data.snapshot.is_some() {
        c.snapshot = data.snapshot.clone();
    }
    if data.translation.is_some() {
        c.translation = data.translation.clone();
    }
    if data.lexicons.is_some() {
        c.lexicons = data.lexicons.clone();
    }
    c.anonymize |= data.anonymize;
    if let Some(v) = data.min_count {
        c.min_count = v;
    }
    if let Some(v) = data.train_fraction {
        c.train_fraction = v;
    }
    if let Some(v) = data.seed {
        c.seed = v;
    }
    if let Some(v) = data.k {
        c.k = v;
    }
    if let Some(t) = train {
        let tc = &mut c.cascade.train;
        if let Some(v) = t.epochs {
            tc.epochs = v;
        }
        if let Some(v) = t.learning_rate {
            tc.learning_rate = v;
        }
        if let Some(v) = t.batch_size {
            tc.batch_size = v;
        }
        if let Some(v) = t.l2 {
            tc.l2 = v;
        }
        if let Some(v) = t.optimizer {
            tc.optimizer = v;
        }
        if let Some(v) = t.train_seed {
            tc.seed = v;
        }
        c.cascade.backend = t.backend(c.cascade.backend.clone());
    }
    Ok(c.with_env_data_root())
}

/// Loads, filters and resolves triples for the configured corpus.
fn prepared(c: &ExperimentConfig) -> Result<(LoadedData, LabeledCorpus, BTreeMap<String, RelationTriple>)> {
    c.validate()?;
    let data = load_data(c)?;
    let filtered = filter_by_min_frequency(&data.corpus, c.min_count)?;
    let triples = extract_all(filtered.labels(), &data.translation, &data.snapshot)?;
    Ok((data, filtered, triples))
}

fn split(c: &ExperimentConfig, corpus: &LabeledCorpus) -> Result<(LabeledCorpus, LabeledCorpus)> {
    Ok(stratified_split(corpus, &SplitSpec { train_fraction: c.train_fraction, seed: c.seed, stratified: true })?)
}

fn print_report(name: &str, r: &MetricReport) {
    eprintln!(
        "{name:<24} acc {:.4}  micro-F1 {:.4}  macro-F1 {:.4}  top-{} acc {:.4}  top-{} F1 {:.4}  (n={})",
        r.accuracy, r.micro_f1, r.macro_f1, r.k, r.top_k_accuracy, r.k, r.top_k_f1, r.n
    );
}

fn anonymize(a: AnonymizeArgs) -> Result<()> {
    let corpus = read_corpus_file(&a.input, a.format)?;
    let lex = match &a.lexicons {
        Some(d) => LexiconSet::load_dir(d)?,
        None => LexiconSet::builtin(),
    };
    let mut audit = Vec::new();
    let mut masks = 0;
    let mut digits = 0;
    let records: Vec<ClinicalRecord> = corpus
        .records()
        .iter()
        .map(|r| {
            let res = anonymize_document(&r.text, &lex);
            masks += res.mask_count;
            digits += res.digit_stripped_count;
            audit.push(serde_json::json!({ "id": r.id, "mask_count": res.mask_count,
                "digit_stripped_count": res.digit_stripped_count, "applied_rules": res.applied_rules }));
            ClinicalRecord { id: r.id.clone(), text: res.masked_text, label: r.label.clone() }
        })
        .collect();
    let out = LabeledCorpus::new(records)?;
    write_corpus(&out, &a.output, format_for(&a.output, a.format)?)?;
    if let Some(p) = &a.rules {
        let mut body = String::new();
        for line in &audit {
            body.push_str(&serde_json::to_string(line)?);
            body.push('\n');
        }
        fs::write(p, body)?;
    }
    eprintln!("anonymized {} records: {masks} masks, {digits} digit runs removed", out.len());
    Ok(())
}

fn review_sample(a: ReviewSampleArgs) -> Result<()> {
    let corpus = read_corpus_file(&a.input, a.format)?;
    let p = generate_review_partition(&corpus, a.fraction, a.overlap, a.seed)?;
    write_json(Some(&a.output), &p)?;
    eprintln!(
        "sample {} records: subset A {}, subset B {}, shared {}",
        p.sample.len(),
        p.subset_a.len(),
        p.subset_b.len(),
        p.shared.len()
    );
    Ok(())
}

fn serve_review(a: ServeReviewArgs) -> Result<()> {
    let text = fs::read_to_string(&a.partition).with_context(|| format!("reading {}", a.partition.display()))?;
    let partition: ReviewPartition = serde_json::from_str(&text)?;
    let roster: [String; 2] = a
        .reviewers
        .clone()
        .try_into()
        .map_err(|v: Vec<String>| anyhow!("--reviewers needs exactly two ids, got {}", v.len()))?;
    let mut session = ReviewSession::new(partition, roster, VerdictStore::open(&a.store)?)?;
    if let Some(p) = &a.originals {
        let originals = read_corpus_file(p, None)?;
        session = session.with_originals(originals.records().iter().map(|r| (r.id.clone(), r.text.clone())).collect());
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(crate::server::serve(Arc::new(session), &a.bind, a.ui))
}

fn extract_relations(a: ExtractArgs) -> Result<()> {
    let c = experiment_config(&a.data, None)?;
    let data = load_data(&c)?;
    let labels: Vec<String> =
        if a.labels.is_empty() { data.corpus.labels().map(String::from).collect() } else { a.labels.clone() };
    let mut out = BTreeMap::new();
    let mut failures = Vec::new();
    for l in &labels {
        match extract_relations_with(l, &data.translation, &data.snapshot, a.precedence) {
            Ok(t) => {
                out.insert(dermcascade::corpus::normalize_label(l), t);
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    write_json(a.output.as_deref(), &out)?;
    if !failures.is_empty() {
        bail!("{} label(s) could not be resolved:\n  {}", failures.len(), failures.join("\n  "));
    }
    eprintln!("resolved {} labels", out.len());
    Ok(())
}

fn train(a: TrainCascadeArgs) -> Result<()> {
    let c = experiment_config(&a.data, Some(&a.train))?;
    let schedule: RelationSchedule = a.schedule.parse()?;
    let (_, filtered, triples) = prepared(&c)?;
    let (tr, te) = split(&c, &filtered)?;
    let model = train_cascade(&tr, &triples, &schedule, &c.cascade)?;
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    let report = evaluate_cascade(&model, &te, &triples, a.mode, c.k)?;
    save_bundle(&a.out, &model, c.rank_by, a.mode)?;
    write_json(Some(&a.out.join("heldout_report.json")), &report)?;
    print_report(&format!("{schedule} [{}]", a.mode), &report);
    eprintln!("bundle written to {}", a.out.display());
    Ok(())
}

fn search(a: SearchArgs) -> Result<()> {
    let c = experiment_config(&a.data, Some(&a.train))?;
    let relations =
        a.relations.iter().map(|r| r.parse::<Relation>().map_err(|e| anyhow!("{e}"))).collect::<Result<Vec<_>>>()?;
    let (_, filtered, triples) = prepared(&c)?;
    let (tr, val) = split(&c, &filtered)?;
    let cfg =
        SearchConfig { cascade: c.cascade.clone(), max_len: Some(a.max_len), mode: a.mode, rank_by: a.rank_by, k: c.k };
    let results = search_schedules(&tr, &val, &triples, &relations, &cfg)?;
    for r in &results {
        print_report(&r.schedule.to_string(), &r.report);
    }
    write_json(a.out.as_deref(), &results)
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionLine {
    id: String,
    relations: Vec<(Relation, String)>,
    ranked: Vec<Scored>,
}

fn infer(a: InferArgs) -> Result<()> {
    let (model, manifest) = load_bundle(&a.bundle)?;
    let mode = a.mode.unwrap_or(manifest.mode);
    if let Some(text) = &a.text {
        let triple = a.triple.as_deref().map(RelationTriple::parse_assignments).transpose()?;
        let p: CascadePrediction = infer_cascade(&model, text, mode, triple.as_ref(), a.top)?;
        return write_json(a.output.as_deref(), &p);
    }
    let input = a.input.as_ref().ok_or_else(|| anyhow!("give --text or --input"))?;
    if a.triple.is_some() {
        bail!("--triple applies to --text; batch OR mode reads triples from the record labels");
    }
    let corpus = read_corpus_file(input, a.data.format)?;
    // OR mode needs gold triples; resolve them through the configured ontology assets.
    let triples = if mode == Mode::OR {
        let data = load_data(&experiment_config(&a.data, None)?)?;
        Some(extract_all(corpus.labels(), &data.translation, &data.snapshot)?)
    } else {
        None
    };
    let mut body = String::new();
    for r in corpus.records() {
        let oracle = triples.as_ref().map(|t| &t[&r.label]);
        let p = infer_cascade(&model, &r.text, mode, oracle, a.top)?;
        body.push_str(&serde_json::to_string(&PredictionLine {
            id: r.id.clone(),
            relations: p.relations,
            ranked: p.ranked,
        })?);
        body.push('\n');
    }
    match &a.output {
        Some(p) => fs::write(p, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

/// A ranked entry given either as a bare label or as `[label, score]`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RankedEntry {
    Label(String),
    Scored(String, #[allow(dead_code)] f64),
}

#[derive(Debug, Deserialize)]
struct PredIn {
    id: String,
    ranked: Vec<RankedEntry>,
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = read_corpus_file(&a.truth, a.format)?;
    let reader = BufReader::new(fs::File::open(&a.pred).with_context(|| format!("opening {}", a.pred.display()))?);
    let mut preds: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PredIn = serde_json::from_str(&line).with_context(|| format!("{} line {}", a.pred.display(), i + 1))?;
        let ranked = p
            .ranked
            .into_iter()
            .map(|e| match e {
                RankedEntry::Label(l) | RankedEntry::Scored(l, _) => dermcascade::corpus::normalize_label(&l),
            })
            .collect();
        if preds.insert(p.id.clone(), ranked).is_some() {
            bail!("duplicate prediction for id {:?}", p.id);
        }
    }
    let mut labels = Vec::with_capacity(truth.len());
    let mut ranked = Vec::with_capacity(truth.len());
    for r in truth.records() {
        let p = preds.remove(&r.id).ok_or_else(|| anyhow!("no prediction for id {:?}", r.id))?;
        labels.push(r.label.clone());
        ranked.push(p);
    }
    if !preds.is_empty() {
        bail!("{} prediction(s) have ids absent from the truth", preds.len());
    }
    let report = evaluate_single_label(&labels, &ranked, a.k)?;
    print_report("evaluation", &report);
    if let Some(p) = &a.confusion {
        fs::write(p, report.confusion.to_csv())?;
    }
    write_json(a.out.as_deref(), &report)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut c = experiment_config(&a.data, Some(&a.train))?;
    if let Some(s) = &a.schedule {
        c.schedules = vec![s.clone()];
    }
    if a.counts_only {
        c.validate()?;
        let data = load_data(&c)?;
        let rows: Vec<_> = class_counts(&data.corpus, &a.thresholds)
            .into_iter()
            .map(|(t, n)| serde_json::json!({ "threshold": t, "classes": n }))
            .collect();
        for r in &rows {
            eprintln!("threshold {:>4}: {} classes", r["threshold"], r["classes"]);
        }
        return write_json(a.out.as_deref(), &rows);
    }
    let rows = threshold_sweep(&c, &a.thresholds)?;
    for r in &rows {
        match (&r.cascade_or, &r.vanilla) {
            (Some(ca), Some(v)) => {
                print_report(&format!("A  threshold {} ({} cls)", r.threshold, r.classes), ca);
                print_report(&format!("B  threshold {} ({} cls)", r.threshold, r.classes), v);
            }
            _ => eprintln!("threshold {}: infeasible ({})", r.threshold, r.note.as_deref().unwrap_or("")),
        }
    }
    if let Some(p) = &a.table {
        fs::write(p, sweep_table_csv(&rows))?;
    }
    write_json(a.out.as_deref(), &rows)
}

fn run_experiment(a: RunArgs) -> Result<()> {
    let mut c = match &a.manifest {
        Some(m) => {
            let mut c = load_manifest(m)?.config;
            c.overwrite = false;
            c
        }
        None => experiment_config(&a.data, Some(&a.train))?,
    };
    if a.manifest.is_none() {
        if !a.schedules.is_empty() {
            c.schedules = a.schedules.clone();
        }
        c.search |= a.search;
        if let Some(m) = a.mode {
            c.mode = m;
        }
        if let Some(k) = a.rank_by {
            c.rank_by = k;
        }
    }
    if let Some(o) = &a.output {
        c.output = o.clone();
    } else if a.manifest.is_some() {
        bail!("re-running a manifest needs --output");
    }
    c.overwrite |= a.overwrite;
    let out = run_pipeline(&c)?;
    for r in &out.reports {
        let name = match (&r.schedule, r.mode) {
            (Some(s), Some(m)) => format!("{s} [{m}]"),
            _ => r.model.clone(),
        };
        print_report(&name, &r.report);
    }
    eprintln!("reports written to {}", out.output.display());
    Ok(())
}

fn generate_fixture(a: FixtureArgs) -> Result<()> {
    let f = synthetic::reference_fixture();
    fs::create_dir_all(&a.out)?;
    write_corpus(&f.corpus, &a.out.join("corpus.jsonl"), CorpusFormat::Jsonl)?;
    fs::write(a.out.join("snapshot.tsv"), f.snapshot.to_tsv())?;
    fs::write(a.out.join("translation.tsv"), f.translation_tsv())?;
    eprintln!("fixture with {} records written to {}", f.corpus.len(), a.out.display());
    Ok(())
}

fn pipe_classifier(a: PipeArgs) -> Result<()> {
    let c = experiment_config(&DataArgs::default(), Some(&a.train))?;
    let stdin = std::io::stdin();
    crate::pipe::serve(stdin.lock(), std::io::stdout().lock(), &c.cascade.train, a.store.as_deref())?;
    Ok(())
}
