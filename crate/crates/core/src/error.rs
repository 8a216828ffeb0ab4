use thiserror::Error;

use crate::{
    anonymizer::AnonymizeError, cascade::CascadeError, corpus::CorpusError, learner::LearnerError,
    metrics::MetricsError, ontology::OntologyError, pipeline::PipelineError, review::ReviewError,
};

/// Crate-wide error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Anonymize(#[from] AnonymizeError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
