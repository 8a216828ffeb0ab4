//! Review sessions for validating the anonymizer.
//!
//! Two reviewers judge their assigned masked documents. Verdicts are
//! immutable: a second verdict on the same document by the same reviewer is
//! a conflict unless it explicitly supersedes the first. Every verdict is
//! appended to a JSON-lines store, so a restarted session replays it.

use std::{
    collections::BTreeMap,
    fs::{File, OpenOptions},
    io::{BufRead, BufReader, Write},
    path::{Path, PathBuf},
    sync::Mutex,
    time::{SystemTime, UNIX_EPOCH},
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymizer::{compute_agreement, Agreement, AnonymizeError, Judgment, ReviewPartition, Verdict};

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("unknown reviewer {0:?}")]
    UnknownReviewer(String),
    #[error("unknown record {0:?}")]
    UnknownRecord(String),
    #[error("record {record_id:?} is not assigned to {reviewer_id:?}")]
    NotAssigned { record_id: String, reviewer_id: String },
    #[error("{reviewer_id:?} already judged {record_id:?}; resubmit with supersede to amend")]
    Duplicate { record_id: String, reviewer_id: String },
    #[error("{reviewer_id:?} has no verdict on {record_id:?} to supersede")]
    NothingToSupersede { record_id: String, reviewer_id: String },
    #[error("roster must name two distinct reviewers, got {0:?}")]
    Roster(Vec<String>),
    #[error("verdict store {path}: {message}")]
    Store { path: String, message: String },
    #[error(transparent)]
    Agreement(#[from] AnonymizeError),
}

/// Coarse class of a [`ReviewError`], for transport status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    NotFound,
    Forbidden,
    Conflict,
    Invalid,
    Internal,
}

impl ReviewError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Self::UnknownReviewer(_) | Self::UnknownRecord(_) => ErrorKind::NotFound,
            Self::NotAssigned { .. } => ErrorKind::Forbidden,
            Self::Duplicate { .. } | Self::NothingToSupersede { .. } => ErrorKind::Conflict,
            Self::Roster(_) => ErrorKind::Invalid,
            Self::Store { .. } | Self::Agreement(_) => ErrorKind::Internal,
        }
    }
}

/// A verdict as submitted by a client; the service stamps the time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSubmission {
    pub record_id: String,
    pub reviewer_id: String,
    pub judgment: Judgment,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub supersede: bool,
}

/// Append-only verdict log with a single writer.
#[derive(Debug)]
pub struct VerdictStore {
    path: Option<PathBuf>,
    inner: Mutex<StoreInner>,
}

#[derive(Debug, Default)]
struct StoreInner {
    file: Option<File>,
    log: Vec<Verdict>,
}

impl VerdictStore {
    pub fn in_memory() -> Self {
        Self { path: None, inner: Mutex::default() }
    }

    /// Opens (or creates) a JSON-lines store and replays its verdicts.
    pub fn open(path: &Path) -> Result<Self, ReviewError> {
        let store_err = |message: String| ReviewError::Store { path: path.display().to_string(), message };
        let mut log = Vec::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(|e| store_err(e.to_string()))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| store_err(e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                log.push(serde_json::from_str(&line).map_err(|e| store_err(format!("line {}: {e}", i + 1)))?);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| store_err(e.to_string()))?;
        Ok(Self { path: Some(path.to_path_buf()), inner: Mutex::new(StoreInner { file: Some(file), log }) })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, StoreInner> {
        // a panic mid-append leaves the log consistent, so poisoning is ignored
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Every verdict ever appended, oldest first.
    pub fn log(&self) -> Vec<Verdict> {
        self.lock().log.clone()
    }
}

/// One document served to a reviewer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub record_id: String,
    pub masked_text: String,
    pub label: String,
    /// Present only when the operator enabled the original side channel.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
    pub judged: usize,
    pub assigned: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewerProgress {
    pub reviewer_id: String,
    pub assigned: usize,
    pub judged: usize,
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub reviewers: Vec<ReviewerProgress>,
    pub shared: usize,
    /// Shared records judged by both reviewers.
    pub shared_judged_by_both: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum AgreementStatus {
    Incomplete { shared: usize, judged_by_both: usize },
    Complete(Agreement),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub record_id: String,
    pub label: String,
    pub masked_text: String,
    pub verdicts: Vec<Verdict>,
}

/// Partition, roster and verdict store for one review round.
#[derive(Debug)]
pub struct ReviewSession {
    partition: ReviewPartition,
    roster: [String; 2],
    store: VerdictStore,
    texts: BTreeMap<String, (String, String)>,
    originals: Option<BTreeMap<String, String>>,
}

impl ReviewSession {
    /// The first reviewer is assigned subset A, the second subset B.
    pub fn new(partition: ReviewPartition, roster: [String; 2], store: VerdictStore) -> Result<Self, ReviewError> {
        if roster[0] == roster[1] || roster.iter().any(|r| r.trim().is_empty()) {
            return Err(ReviewError::Roster(roster.to_vec()));
        }
        let texts =
            partition.sample.records().iter().map(|r| (r.id.clone(), (r.text.clone(), r.label.clone()))).collect();
        Ok(Self { partition, roster, store, texts, originals: None })
    }

    /// Exposes pre-anonymization texts alongside the masked ones. Off unless
    /// called.
    pub fn with_originals(mut self, originals: BTreeMap<String, String>) -> Self {
        self.originals = Some(originals);
        self
    }

    pub fn partition(&self) -> &ReviewPartition {
        &self.partition
    }

    pub fn roster(&self) -> &[String; 2] {
        &self.roster
    }

    fn assigned(&self, reviewer: &str) -> Result<&std::collections::BTreeSet<String>, ReviewError> {
        if reviewer == self.roster[0] {
            Ok(&self.partition.subset_a)
        } else if reviewer == self.roster[1] {
            Ok(&self.partition.subset_b)
        } else {
            Err(ReviewError::UnknownReviewer(reviewer.to_string()))
        }
    }

    /// Latest verdict per (record, reviewer).
    pub fn current_verdicts(&self) -> Vec<Verdict> {
        current(&self.store.lock().log).into_values().collect()
    }

    fn judged_count(&self, reviewer: &str, current: &BTreeMap<(String, String), Verdict>) -> usize {
        current.keys().filter(|(_, r)| r == reviewer).count()
    }

    /// The reviewer's first unjudged document in id order, if any.
    pub fn next_item(&self, reviewer: &str) -> Result<Option<ReviewItem>, ReviewError> {
        let assigned = self.assigned(reviewer)?;
        let cur = current(&self.store.lock().log);
        let judged = self.judged_count(reviewer, &cur);
        let next = assigned.iter().find(|id| !cur.contains_key(&((*id).clone(), reviewer.to_string())));
        Ok(next.map(|id| {
            let (text, label) = &self.texts[id];
            ReviewItem {
                record_id: id.clone(),
                masked_text: text.clone(),
                label: label.clone(),
                original_text: self.originals.as_ref().and_then(|o| o.get(id).cloned()),
                judged,
                assigned: assigned.len(),
            }
        }))
    }

    pub fn submit(&self, submission: VerdictSubmission) -> Result<Verdict, ReviewError> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        self.submit_at(submission, now)
    }

    /// Records a verdict with an explicit timestamp (Unix milliseconds).
    pub fn submit_at(&self, s: VerdictSubmission, timestamp: u64) -> Result<Verdict, ReviewError> {
        let assigned = self.assigned(&s.reviewer_id)?;
        if !self.texts.contains_key(&s.record_id) {
            return Err(ReviewError::UnknownRecord(s.record_id));
        }
        if !assigned.contains(&s.record_id) {
            return Err(ReviewError::NotAssigned { record_id: s.record_id, reviewer_id: s.reviewer_id });
        }
        let mut inner = self.store.lock();
        let exists = inner.log.iter().any(|v| v.record_id == s.record_id && v.reviewer_id == s.reviewer_id);
        match (exists, s.supersede) {
            (true, false) => return Err(ReviewError::Duplicate { record_id: s.record_id, reviewer_id: s.reviewer_id }),
            (false, true) => {
                return Err(ReviewError::NothingToSupersede { record_id: s.record_id, reviewer_id: s.reviewer_id })
            }
            _ => {}
        }
        let verdict = Verdict {
            record_id: s.record_id,
            reviewer_id: s.reviewer_id,
            judgment: s.judgment,
            note: s.note.filter(|n| !n.trim().is_empty()),
            timestamp,
            supersedes: s.supersede,
        };
        if let Some(file) = inner.file.as_mut() {
            let line = serde_json::to_string(&verdict).expect("verdict serializes") + "\n";
            file.write_all(line.as_bytes()).and_then(|_| file.flush()).map_err(|e| ReviewError::Store {
                path: self.store.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                message: e.to_string(),
            })?;
        }
        inner.log.push(verdict.clone());
        Ok(verdict)
    }

    pub fn progress(&self) -> Progress {
        let cur = current(&self.store.lock().log);
        let reviewers = self
            .roster
            .iter()
            .map(|r| {
                let assigned = self.assigned(r).expect("roster member").len();
                let judged = self.judged_count(r, &cur);
                ReviewerProgress { reviewer_id: r.clone(), assigned, judged, pending: assigned - judged }
            })
            .collect();
        Progress { reviewers, shared: self.partition.shared.len(), shared_judged_by_both: self.judged_by_both(&cur) }
    }

    fn judged_by_both(&self, cur: &BTreeMap<(String, String), Verdict>) -> usize {
        self.partition
            .shared
            .iter()
            .filter(|id| self.roster.iter().all(|r| cur.contains_key(&((*id).clone(), r.clone()))))
            .count()
    }

    /// Agreement over the shared set once both reviewers judged all of it.
    pub fn agreement(&self) -> Result<AgreementStatus, ReviewError> {
        let cur = current(&self.store.lock().log);
        let both = self.judged_by_both(&cur);
        if both < self.partition.shared.len() || self.partition.shared.is_empty() {
            return Ok(AgreementStatus::Incomplete { shared: self.partition.shared.len(), judged_by_both: both });
        }
        let verdicts: Vec<Verdict> = cur.into_values().collect();
        Ok(AgreementStatus::Complete(compute_agreement(&verdicts, &self.partition)?))
    }

    /// Shared records on which the two current verdicts differ.
    pub fn disagreements(&self) -> Vec<Disagreement> {
        let cur = current(&self.store.lock().log);
        self.partition
            .shared
            .iter()
            .filter_map(|id| {
                let a = cur.get(&(id.clone(), self.roster[0].clone()))?;
                let b = cur.get(&(id.clone(), self.roster[1].clone()))?;
                (a.judgment != b.judgment).then(|| {
                    let (text, label) = &self.texts[id];
                    Disagreement {
                        record_id: id.clone(),
                        label: label.clone(),
                        masked_text: text.clone(),
                        verdicts: vec![a.clone(), b.clone()],
                    }
                })
            })
            .collect()
    }
}

fn current(log: &[Verdict]) -> BTreeMap<(String, String), Verdict> {
    let mut out = BTreeMap::new();
    for v in log {
        out.insert((v.record_id.clone(), v.reviewer_id.clone()), v.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{
        anonymizer::generate_review_partition,
        corpus::{ClinicalRecord, LabeledCorpus},
    };

    fn session(store: VerdictStore) -> ReviewSession {
        let recs = (0..20).map(|i| ClinicalRecord::new(format!("r{i:02}"), format!("texto {i}"), "acné")).collect();
        let p = generate_review_partition(&LabeledCorpus::new(recs).unwrap(), 1.0, 0.2, 5).unwrap();
        ReviewSession::new(p, ["ana".into(), "bea".into()], store).unwrap()
    }

    fn sub(id: &str, who: &str, j: Judgment, supersede: bool) -> VerdictSubmission {
        VerdictSubmission { record_id: id.into(), reviewer_id: who.into(), judgment: j, note: None, supersede }
    }

    #[test]
    fn queue_progress_and_conflicts() {
        let s = session(VerdictStore::in_memory());
        let first = s.next_item("ana").unwrap().unwrap();
        assert_eq!(first.judged, 0);
        assert!(first.original_text.is_none());
        s.submit_at(sub(&first.record_id, "ana", Judgment::Correct, false), 1).unwrap();
        assert_ne!(s.next_item("ana").unwrap().unwrap().record_id, first.record_id);
        let err = s.submit_at(sub(&first.record_id, "ana", Judgment::OverMasked, false), 2).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Conflict);
        s.submit_at(sub(&first.record_id, "ana", Judgment::OverMasked, true), 3).unwrap();
        let p = s.progress();
        assert_eq!(p.reviewers[0].judged, 1);
        assert_eq!(p.reviewers[0].judged + p.reviewers[0].pending, p.reviewers[0].assigned);
        assert_eq!(s.current_verdicts()[0].judgment, Judgment::OverMasked);

        let only_b = s.partition().unique_b().next().unwrap().clone();
        assert_eq!(
            s.submit_at(sub(&only_b, "ana", Judgment::Correct, false), 4).unwrap_err().kind(),
            ErrorKind::Forbidden
        );
        assert_eq!(s.next_item("eve").unwrap_err().kind(), ErrorKind::NotFound);
        let fresh = s.partition().unique_b().nth(1).unwrap().clone();
        assert_eq!(
            s.submit_at(sub(&fresh, "bea", Judgment::Correct, true), 5).unwrap_err().kind(),
            ErrorKind::Conflict
        );
    }

    #[test]
    fn agreement_becomes_available_when_shared_set_is_judged() {
        let s = session(VerdictStore::in_memory());
        let shared: Vec<String> = s.partition().shared.iter().cloned().collect();
        assert!(matches!(s.agreement().unwrap(), AgreementStatus::Incomplete { judged_by_both: 0, .. }));
        for (i, id) in shared.iter().enumerate() {
            s.submit_at(sub(id, "ana", Judgment::Correct, false), 0).unwrap();
            let j = if i == 0 { Judgment::UnderMasked } else { Judgment::Correct };
            s.submit_at(sub(id, "bea", j, false), 0).unwrap();
        }
        match s.agreement().unwrap() {
            AgreementStatus::Complete(a) => {
                assert_eq!(a.shared, shared.len());
                assert_eq!(a.matching, shared.len() - 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        let d = s.disagreements();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].record_id, shared[0]);
    }

    #[test]
    fn store_replays_after_restart() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verdicts.jsonl");
        let id = {
            let s = session(VerdictStore::open(&path).unwrap());
            let id = s.next_item("bea").unwrap().unwrap().record_id;
            s.submit_at(sub(&id, "bea", Judgment::UnderMasked, false), 9).unwrap();
            id
        };
        let s = session(VerdictStore::open(&path).unwrap());
        assert_eq!(s.progress().reviewers[1].judged, 1);
        assert_eq!(s.submit_at(sub(&id, "bea", Judgment::Correct, false), 10).unwrap_err().kind(), ErrorKind::Conflict);
    }

    #[test]
    fn roster_must_be_two_distinct_ids() {
        let recs = (0..4).map(|i| ClinicalRecord::new(format!("r{i}"), "t", "a")).collect();
        let p = generate_review_partition(&LabeledCorpus::new(recs).unwrap(), 1.0, 0.0, 1).unwrap();
        assert!(ReviewSession::new(p, ["x".into(), "x".into()], VerdictStore::in_memory()).is_err());
    }
}
