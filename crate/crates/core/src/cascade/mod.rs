//! Cascaded disease classification.
//!
//! A cascade predicts the relations of a [`RelationSchedule`] one after the
//! other, appending each value to the report as a marker, and a final model
//! predicts the disease from the report plus all markers. Training uses gold
//! relation values for the markers (teacher forcing). At inference the
//! markers come either from the gold triple ([`Mode::OR`], stages bypassed)
//! or from the stages' own top-1 predictions ([`Mode::PR`]).

mod augment;
mod bundle;
mod schedule;

use std::{
    collections::{BTreeMap, BTreeSet},
    fmt,
    str::FromStr,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use augment::{augment_input, AugmentationTemplate};
pub use bundle::{load_bundle, save_bundle, BundleManifest, BUNDLE_MANIFEST};
pub use schedule::{enumerate_schedules, RelationSchedule};

use crate::{
    corpus::LabeledCorpus,
    learner::{
        ClassifierBackend, ConstantClassifier, LearnerError, Scored, TextClassifier, TrainConfig, TrainedClassifier,
    },
    metrics::{evaluate_single_label, MetricReport, MetricsError, RankKey},
    ontology::{Relation, RelationTriple, UnknownValue},
};

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("unknown relation {0:?} (expected t, gr or sit)")]
    UnknownRelation(String),
    #[error(transparent)]
    UnknownValue(#[from] UnknownValue),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("max length {max_len} must be between 1 and the number of relations ({relations})")]
    MaxLenTooLarge { max_len: usize, relations: usize },
    #[error("invalid augmentation template: {0}")]
    InvalidTemplate(String),
    #[error("no relation triple for labels: {}", .0.join(", "))]
    MissingTriples(Vec<String>),
    #[error("mode contract: {0}")]
    ModeContract(&'static str),
    #[error("training and validation share {0} record id(s)")]
    OverlappingSplits(usize),
    #[error("bundle: {0}")]
    Bundle(String),
    #[error("stage {stage} ({relation}): {source}")]
    Stage {
        stage: usize,
        relation: Relation,
        #[source]
        source: LearnerError,
    },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Mode {
    /// Oracle: gold relation values are injected, stages are skipped.
    OR,
    /// Predictive: every stage feeds its top-1 value to the next.
    PR,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::OR => "OR",
            Mode::PR => "PR",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "OR" | "ORACLE" => Ok(Mode::OR),
            "PR" | "PREDICTIVE" => Ok(Mode::PR),
            other => Err(format!("unknown mode {other:?} (OR or PR)")),
        }
    }
}

/// How stage and final models are trained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub train: TrainConfig,
    pub backend: ClassifierBackend,
    /// Per-relation backend overrides for stage models.
    pub stage_backends: BTreeMap<Relation, ClassifierBackend>,
    pub template: AugmentationTemplate,
}

impl CascadeConfig {
    fn stage_backend(&self, r: Relation) -> &ClassifierBackend {
        self.stage_backends.get(&r).unwrap_or(&self.backend)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeModel {
    pub schedule: RelationSchedule,
    pub template: AugmentationTemplate,
    /// One classifier per schedule entry, in order.
    pub stages: Vec<TrainedClassifier>,
    pub final_model: TrainedClassifier,
    /// Notes raised while training, such as constant stages.
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Gold triple for every record, or the list of labels lacking one.
pub fn gold_triples(
    corpus: &LabeledCorpus,
    triples: &BTreeMap<String, RelationTriple>,
) -> Result<Vec<RelationTriple>, CascadeError> {
    let missing: BTreeSet<&str> = corpus.labels().filter(|l| !triples.contains_key(*l)).collect();
    if !missing.is_empty() {
        return Err(CascadeError::MissingTriples(missing.into_iter().map(String::from).collect()));
    }
    Ok(corpus.records().iter().map(|r| triples[&r.label]).collect())
}

/// Inputs seen by stage `stage` (or the final model when `stage` equals the
/// schedule length): each text with gold markers for the relations that
/// precede it.
pub fn teacher_forced_inputs(
    texts: &[String],
    gold: &[RelationTriple],
    schedule: &RelationSchedule,
    stage: usize,
    template: &AugmentationTemplate,
) -> Vec<String> {
    let upstream = &schedule.relations()[..stage.min(schedule.len())];
    texts
        .iter()
        .zip(gold)
        .map(|(text, triple)| {
            let known: Vec<(Relation, &str)> = upstream.iter().map(|&r| (r, triple.get(r))).collect();
            template.apply(text, &known)
        })
        .collect()
}

/// Trains one stage per scheduled relation and the final disease model,
/// all on gold-augmented inputs.
pub fn train_cascade(
    train: &LabeledCorpus,
    triples: &BTreeMap<String, RelationTriple>,
    schedule: &RelationSchedule,
    config: &CascadeConfig,
) -> Result<CascadeModel, CascadeError> {
    config.template.validate()?;
    let gold = gold_triples(train, triples)?;
    let texts = train.texts();
    let mut stages = Vec::with_capacity(schedule.len());
    let mut warnings = Vec::new();

    for (i, &relation) in schedule.relations().iter().enumerate() {
        let inputs = teacher_forced_inputs(&texts, &gold, schedule, i, &config.template);
        let targets: Vec<String> = gold.iter().map(|t| t.get(relation).to_string()).collect();
        let distinct: BTreeSet<&String> = targets.iter().collect();
        let model = if distinct.len() == 1 {
            let value = targets[0].clone();
            let msg = format!(
                "stage {i} ({relation}) has the single value {value:?} in training; using a constant predictor"
            );
            log::warn!("{msg}");
            warnings.push(msg);
            TrainedClassifier::Constant(ConstantClassifier::new(value))
        } else {
            let name = format!("stage-{i}-{relation}");
            config
                .stage_backend(relation)
                .fit(&name, &inputs, &targets, &config.train)
                .map_err(|source| CascadeError::Stage { stage: i, relation, source })?
        };
        stages.push(model);
    }

    let inputs = teacher_forced_inputs(&texts, &gold, schedule, schedule.len(), &config.template);
    let final_model = train_disease_model("final", &inputs, &train.label_sequence(), config, &mut warnings)?;
    Ok(CascadeModel { schedule: schedule.clone(), template: config.template.clone(), stages, final_model, warnings })
}

fn train_disease_model(
    name: &str,
    inputs: &[String],
    labels: &[String],
    config: &CascadeConfig,
    warnings: &mut Vec<String>,
) -> Result<TrainedClassifier, CascadeError> {
    if labels.iter().collect::<BTreeSet<_>>().len() == 1 {
        let msg = format!("{name} model has a single disease {:?}; using a constant predictor", labels[0]);
        log::warn!("{msg}");
        warnings.push(msg);
        return Ok(TrainedClassifier::Constant(ConstantClassifier::new(labels[0].clone())));
    }
    Ok(config.backend.fit(name, inputs, labels, &config.train)?)
}

/// The no-relation baseline: a disease classifier on the raw report.
pub fn train_vanilla(train: &LabeledCorpus, config: &CascadeConfig) -> Result<TrainedClassifier, CascadeError> {
    train_disease_model("vanilla", &train.texts(), &train.label_sequence(), config, &mut Vec::new())
}

/// Output of one cascade inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePrediction {
    /// Relation values used for augmentation, in schedule order.
    pub relations: Vec<(Relation, String)>,
    /// Top-k diseases, best first.
    pub ranked: Vec<Scored>,
}

/// Runs the cascade on one report. `oracle` is required in OR mode and
/// forbidden in PR mode.
pub fn infer_cascade(
    model: &CascadeModel,
    text: &str,
    mode: Mode,
    oracle: Option<&RelationTriple>,
    k: usize,
) -> Result<CascadePrediction, CascadeError> {
    if k == 0 {
        return Err(LearnerError::InvalidK.into());
    }
    let relations: Vec<(Relation, String)> = match (mode, oracle) {
        (Mode::OR, Some(triple)) => {
            model.schedule.relations().iter().map(|&r| (r, triple.get(r).to_string())).collect()
        }
        (Mode::OR, None) => return Err(CascadeError::ModeContract("OR mode needs the gold relation triple")),
        (Mode::PR, Some(_)) => return Err(CascadeError::ModeContract("PR mode must not be given a relation triple")),
        (Mode::PR, None) => {
            let mut known: Vec<(Relation, String)> = Vec::with_capacity(model.schedule.len());
            for (i, (&relation, stage)) in model.schedule.relations().iter().zip(&model.stages).enumerate() {
                let input = model.template.apply(text, &as_refs(&known));
                let value =
                    stage.predict(&input).map_err(|source| CascadeError::Stage { stage: i, relation, source })?;
                known.push((relation, value));
            }
            known
        }
    };
    let input = model.template.apply(text, &as_refs(&relations));
    let ranked = model.final_model.predict_topk(&input, k)?;
    Ok(CascadePrediction { relations, ranked })
}

fn as_refs(known: &[(Relation, String)]) -> Vec<(Relation, &str)> {
    known.iter().map(|(r, v)| (*r, v.as_str())).collect()
}

/// Rankings of length `k` for every record of `test`.
pub fn rank_cascade(
    model: &CascadeModel,
    test: &LabeledCorpus,
    triples: &BTreeMap<String, RelationTriple>,
    mode: Mode,
    k: usize,
) -> Result<Vec<Vec<String>>, CascadeError> {
    let gold = match mode {
        Mode::OR => Some(gold_triples(test, triples)?),
        Mode::PR => None,
    };
    test.records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let oracle = gold.as_ref().map(|g| &g[i]);
            let p = infer_cascade(model, &r.text, mode, oracle, k)?;
            Ok(p.ranked.into_iter().map(|(l, _)| l).collect())
        })
        .collect()
}

pub fn evaluate_cascade(
    model: &CascadeModel,
    test: &LabeledCorpus,
    triples: &BTreeMap<String, RelationTriple>,
    mode: Mode,
    k: usize,
) -> Result<MetricReport, CascadeError> {
    let ranked = rank_cascade(model, test, triples, mode, k)?;
    Ok(evaluate_single_label(&test.label_sequence(), &ranked, k)?)
}

/// Evaluates any text classifier on raw reports.
pub fn evaluate_classifier(
    model: &dyn TextClassifier,
    test: &LabeledCorpus,
    k: usize,
) -> Result<MetricReport, CascadeError> {
    let ranked = test
        .records()
        .iter()
        .map(|r| Ok(model.predict_topk(&r.text, k)?.into_iter().map(|(l, _)| l).collect()))
        .collect::<Result<Vec<Vec<String>>, LearnerError>>()?;
    Ok(evaluate_single_label(&test.label_sequence(), &ranked, k)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub cascade: CascadeConfig,
    /// Longest schedule tried; `None` means all relations.
    pub max_len: Option<usize>,
    pub mode: Mode,
    pub rank_by: RankKey,
    pub k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { cascade: CascadeConfig::default(), max_len: None, mode: Mode::PR, rank_by: RankKey::Accuracy, k: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub schedule: RelationSchedule,
    pub report: MetricReport,
}

/// Trains and scores one cascade per enumerated schedule, best first.
/// Equal scores keep enumeration order.
pub fn search_schedules(
    train: &LabeledCorpus,
    validation: &LabeledCorpus,
    triples: &BTreeMap<String, RelationTriple>,
    relations: &[Relation],
    config: &SearchConfig,
) -> Result<Vec<ScheduleResult>, CascadeError> {
    let train_ids: BTreeSet<&str> = train.records().iter().map(|r| r.id.as_str()).collect();
    let shared = validation.records().iter().filter(|r| train_ids.contains(r.id.as_str())).count();
    if shared > 0 {
        return Err(CascadeError::OverlappingSplits(shared));
    }
    let distinct: BTreeSet<Relation> = relations.iter().copied().collect();
    let schedules = enumerate_schedules(relations, config.max_len.unwrap_or(distinct.len()))?;
    let mut results = Vec::with_capacity(schedules.len());
    for schedule in schedules {
        let model = train_cascade(train, triples, &schedule, &config.cascade)?;
        let report = evaluate_cascade(&model, validation, triples, config.mode, config.k)?;
        log::info!("schedule {schedule}: accuracy {:.4}", report.accuracy);
        results.push(ScheduleResult { schedule, report });
    }
    results.sort_by(|a, b| {
        b.report.score(config.rank_by).partial_cmp(&a.report.score(config.rank_by)).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(results)
}
