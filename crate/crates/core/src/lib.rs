//! Pathology classification for Spanish dermatology notes.
//!
//! The crate covers the whole experimental pipeline:
//!
//! * [`corpus`]: ingestion of labeled reports, class-frequency filtering and
//!   stratified splits.
//! * [`anonymizer`]: rule-based de-identification, review sampling and
//!   inter-rater agreement.
//! * [`ontology`]: mapping of pathology labels to their (type, severity, site)
//!   relation triple through a local ontology snapshot.
//! * [`learner`]: TF-IDF featurization and a softmax linear classifier behind
//!   a pluggable classifier interface.
//! * [`cascade`]: relation schedules, teacher-forced cascade training and
//!   oracle / predictive inference.
//! * [`metrics`]: accuracy, micro/macro F1, top-k scores and confusion
//!   matrices.
//! * [`review`]: the review session service backing the adjudication API.
//! * [`pipeline`]: experiment configuration, end-to-end runs and threshold
//!   sweeps.
//! * [`synthetic`]: the deterministic synthetic corpus used by tests and demos.

pub mod anonymizer;
pub mod cascade;
pub mod corpus;
pub mod learner;
pub mod metrics;
pub mod ontology;
pub mod pipeline;
pub mod review;
pub mod synthetic;

mod error;
mod rng;

pub use error::{Error, Result};
