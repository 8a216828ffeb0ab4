//! Rule-based de-identification of clinical notes and the tooling around
//! its manual validation.
//!
//! Numbers are deleted outright; names, surnames, cities and hospitals found
//! in the lexicons are replaced with [`MASK_TOKEN`], unless they are ordinary
//! frequent words or dermatology vocabulary; the word following a title
//! (`dr`, `dra`, `doctor`, `doctora`) is masked too. A stratified sample of
//! the output is then split between two reviewers whose verdicts on the
//! overlapping records yield the agreement figures.

mod lexicon;
mod mask;
mod review;
mod tokens;

use thiserror::Error;

pub use lexicon::{default_title_patterns, parse_lexicon, LexiconSet, LEXICON_FILES};
pub use mask::{anonymize_document, AnonymizationResult, AppliedRule, MASK_TOKEN};
pub use review::{compute_agreement, generate_review_partition, Agreement, Judgment, ReviewPartition, Verdict};

use crate::corpus::{ClinicalRecord, LabeledCorpus};

#[derive(Debug, Error)]
pub enum AnonymizeError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("given-name, surname and place lexicons are all empty")]
    EmptyLexicons,
    #[error("{name} must be a ratio in range, got {value}")]
    InvalidFraction { name: &'static str, value: f64 },
    #[error("sample too small: {0}")]
    SampleTooSmall(String),
    #[error("partition has no shared records")]
    NoSharedRecords,
    #[error("missing verdict on shared record {0:?}")]
    MissingVerdict(String),
    #[error("more than one verdict on {record_id:?} by {reviewer_id:?}")]
    DuplicateVerdict { record_id: String, reviewer_id: String },
    #[error("agreement needs exactly two reviewers, found {0}")]
    ReviewerCount(usize),
}

/// Anonymizes every record text, keeping ids and labels.
pub fn anonymize_corpus(corpus: &LabeledCorpus, lexicons: &LexiconSet) -> LabeledCorpus {
    let records = corpus
        .records()
        .iter()
        .map(|r| ClinicalRecord {
            id: r.id.clone(),
            text: anonymize_document(&r.text, lexicons).masked_text,
            label: r.label.clone(),
        })
        .collect();
    LabeledCorpus::new(records).expect("ids are unchanged")
}
