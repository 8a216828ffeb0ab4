//! Browser demo: anonymization with highlighted spans, relation lookup
//! against the shipped ontology snapshot, and a small cascade trained in the
//! page on a reduced synthetic corpus.
//!
//! Each operation is a plain Rust function returning a serializable value;
//! the `#[wasm_bindgen]` wrappers only convert to and from JSON strings.

use dermcascade::{
    anonymizer::{anonymize_document, LexiconSet},
    cascade::{infer_cascade, train_cascade, train_vanilla, CascadeConfig, CascadeModel, Mode, RelationSchedule},
    learner::{Scored, TextClassifier, TrainConfig, TrainedClassifier},
    ontology::{extract_relations, OntologySnapshot, RelationTriple, TranslationMap},
    synthetic::{generate, SyntheticSpec},
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// A run of the original text, tagged with the rule that rewrote it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub text: String,
    pub rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnonymizeView {
    pub masked_text: String,
    pub mask_count: usize,
    pub digit_stripped_count: usize,
    pub segments: Vec<Segment>,
}

pub fn anonymize_view(text: &str) -> AnonymizeView {
    let res = anonymize_document(text, &LexiconSet::builtin());
    let mut rules = res.applied_rules.clone();
    rules.sort_by_key(|r| (r.start, r.end));
    let mut segments = Vec::new();
    let mut at = 0;
    for r in rules.iter().filter(|r| r.start < r.end) {
        if r.start < at {
            continue;
        }
        if r.start > at {
            segments.push(Segment { text: text[at..r.start].to_string(), rule: None });
        }
        segments.push(Segment { text: text[r.start..r.end].to_string(), rule: Some(r.rule.clone()) });
        at = r.end;
    }
    if at < text.len() {
        segments.push(Segment { text: text[at..].to_string(), rule: None });
    }
    AnonymizeView {
        masked_text: res.masked_text,
        mask_count: res.mask_count,
        digit_stripped_count: res.digit_stripped_count,
        segments,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LookupView {
    pub label: String,
    pub english: Option<String>,
    pub triple: Option<RelationTriple>,
    pub error: Option<String>,
}

/// Resolves a Spanish label through the shipped translation map and snapshot.
pub fn lookup_relations(label: &str) -> LookupView {
    let map = TranslationMap::reference();
    let english = map.translate_label(label).ok();
    match extract_relations(label, &map, &OntologySnapshot::reference()) {
        Ok(t) => LookupView { label: label.to_string(), english, triple: Some(t), error: None },
        Err(e) => LookupView { label: label.to_string(), english, triple: None, error: Some(e.to_string()) },
    }
}

/// Spanish labels known to the shipped translation map.
pub fn known_labels() -> Vec<String> {
    TranslationMap::reference().entries().map(|(es, _)| es.to_string()).collect()
}

/// A cascade and a flat classifier trained on the same reduced fixture.
pub struct Demo {
    cascade: CascadeModel,
    vanilla: TrainedClassifier,
    samples: Vec<(String, String, RelationTriple)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoPrediction {
    pub relations: Vec<(String, String)>,
    pub cascade: Vec<Scored>,
    pub vanilla: Vec<Scored>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoSample {
    pub text: String,
    pub label: String,
    pub triple: RelationTriple,
}

impl Demo {
    pub fn train(docs_per_disease: usize) -> Result<Self, String> {
        let fixture = generate(&SyntheticSpec { docs_per_disease, ..SyntheticSpec::default() });
        let config = CascadeConfig {
            // a faster schedule than the library default keeps in-page training short
            train: TrainConfig { epochs: 10, learning_rate: 0.01, ..TrainConfig::default() },
            ..CascadeConfig::default()
        };
        let schedule: RelationSchedule = "sit,t".parse().map_err(|e| format!("{e}"))?;
        let cascade =
            train_cascade(&fixture.corpus, &fixture.triples, &schedule, &config).map_err(|e| e.to_string())?;
        let vanilla = train_vanilla(&fixture.corpus, &config).map_err(|e| e.to_string())?;
        // held-out style samples: same generator, different seed
        let extra = generate(&SyntheticSpec { docs_per_disease: 2, seed: 1_000, ..SyntheticSpec::default() });
        let samples =
            extra.corpus.records().iter().map(|r| (r.text.clone(), r.label.clone(), extra.triples[&r.label])).collect();
        Ok(Self { cascade, vanilla, samples })
    }

    pub fn sample(&self, index: usize) -> DemoSample {
        let (text, label, triple) = &self.samples[index % self.samples.len()];
        DemoSample { text: text.clone(), label: label.clone(), triple: *triple }
    }

    /// OR mode needs `triple`; PR mode ignores it.
    pub fn classify(
        &self,
        text: &str,
        mode: Mode,
        triple: Option<&RelationTriple>,
        k: usize,
    ) -> Result<DemoPrediction, String> {
        let p = infer_cascade(&self.cascade, text, mode, triple, k).map_err(|e| e.to_string())?;
        let vanilla = self.vanilla.predict_topk(text, k).map_err(|e| e.to_string())?;
        Ok(DemoPrediction {
            relations: p.relations.into_iter().map(|(r, v)| (r.to_string(), v)).collect(),
            cascade: p.ranked,
            vanilla,
        })
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo views serialize")
}

#[wasm_bindgen]
pub fn anonymize(text: &str) -> String {
    to_json(&anonymize_view(text))
}

#[wasm_bindgen]
pub fn lookup(label: &str) -> String {
    to_json(&lookup_relations(label))
}

#[wasm_bindgen]
pub fn labels() -> String {
    to_json(&known_labels())
}

#[wasm_bindgen(js_name = CascadeDemo)]
pub struct CascadeDemo(Demo);

#[wasm_bindgen(js_class = CascadeDemo)]
impl CascadeDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(docs_per_disease: usize) -> Result<CascadeDemo, JsError> {
        Demo::train(docs_per_disease).map(CascadeDemo).map_err(|e| JsError::new(&e))
    }

    pub fn sample(&self, index: usize) -> String {
        to_json(&self.0.sample(index))
    }

    /// `mode` is "OR" or "PR"; `triple` is `t=..,gr=..,sit=..` or empty.
    pub fn classify(&self, text: &str, mode: &str, triple: &str) -> Result<String, JsError> {
        let mode = mode.parse::<Mode>().map_err(|e| JsError::new(&e.to_string()))?;
        let triple = if triple.trim().is_empty() {
            None
        } else {
            Some(RelationTriple::parse_assignments(triple).map_err(|e| JsError::new(&e.to_string()))?)
        };
        let p = self.0.classify(text, mode, triple.as_ref(), 3).map_err(|e| JsError::new(&e))?;
        Ok(to_json(&p))
    }
}
