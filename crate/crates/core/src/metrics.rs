//! Evaluation of single-label rankings.
//!
//! Scores reported:
//!
//! * accuracy: correct at rank 1 over N.
//! * micro-F1: pooled over classes; for single-label input this equals
//!   accuracy, and every report asserts it.
//! * macro-F1: mean per-class F1 over the classes present in the truth.
//! * top-k accuracy: share of documents whose true label is in the top k.
//! * top-k F1, set based: a hit in the top k is a TP for the true class, a
//!   miss is an FN for it, and every other label in the top k is an FP for
//!   that label. Counts are pooled micro-style.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no documents to evaluate")]
    Empty,
    #[error("truth has {truth} entries but predictions have {predicted}")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("document {0} has an empty ranking")]
    EmptyRanking(usize),
}

/// Rows are true labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, truth: &str, predicted: &str) -> u64 {
        let idx = |l: &str| self.class_names.iter().position(|c| c == l);
        match (idx(truth), idx(predicted)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    /// CSV with a `truth\predicted` corner cell, one row per class.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["truth\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// Classes of the truth in descending frequency (ties by name), followed by
/// predicted-only labels in name order.
fn class_order<'a>(truth: &'a [String], predicted: impl Iterator<Item = &'a String>) -> (Vec<String>, usize) {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for t in truth {
        *freq.entry(t).or_default() += 1;
    }
    let mut classes: Vec<(&str, usize)> = freq.into_iter().collect();
    classes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut names: Vec<String> = classes.iter().map(|(c, _)| c.to_string()).collect();
    let known: BTreeSet<&str> = classes.iter().map(|(c, _)| *c).collect();
    let extra: BTreeSet<&String> = predicted.filter(|p| !known.contains(p.as_str())).collect();
    let n_truth = names.len();
    names.extend(extra.into_iter().cloned());
    (names, n_truth)
}

/// Confusion matrix from top-1 predictions. Predicted labels never seen in
/// the truth get extra columns (and zero rows) with a warning.
pub fn confusion_matrix(truth: &[String], predicted: &[String]) -> Result<ConfusionMatrix, MetricsError> {
    check_lengths(truth.len(), predicted.len())?;
    let (class_names, n_truth) = class_order(truth, predicted.iter());
    if class_names.len() > n_truth {
        log::warn!(
            "predictions contain {} label(s) absent from the truth: {:?}",
            class_names.len() - n_truth,
            &class_names[n_truth..]
        );
    }
    let index: BTreeMap<&str, usize> = class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let n = class_names.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (t, p) in truth.iter().zip(predicted) {
        counts[index[t.as_str()]][index[p.as_str()]] += 1;
    }
    Ok(ConfusionMatrix { class_names, counts })
}

fn check_lengths(truth: usize, predicted: usize) -> Result<(), MetricsError> {
    if truth != predicted {
        return Err(MetricsError::LengthMismatch { truth, predicted });
    }
    if truth == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

fn f1(tp: f64, fp: f64, fn_: f64) -> f64 {
    let denom = 2.0 * tp + fp + fn_;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * tp / denom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub k: usize,
    pub top_k_accuracy: f64,
    pub top_k_f1: f64,
    /// Per-class F1 in descending truth frequency.
    pub per_class_f1: Vec<(String, f64)>,
    /// Always "classes-present-in-truth".
    pub macro_average_over: String,
    pub confusion: ConfusionMatrix,
}

impl MetricReport {
    pub fn per_class(&self, label: &str) -> Option<f64> {
        self.per_class_f1.iter().find(|(l, _)| l == label).map(|&(_, f)| f)
    }

    pub fn score(&self, key: RankKey) -> f64 {
        match key {
            RankKey::Accuracy => self.accuracy,
            RankKey::MicroF1 => self.micro_f1,
            RankKey::MacroF1 => self.macro_f1,
        }
    }
}

/// Metric used to rank competing models.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankKey {
    #[default]
    Accuracy,
    MicroF1,
    MacroF1,
}

impl std::str::FromStr for RankKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_lowercase().replace('_', "-").as_str() {
            "accuracy" => Ok(Self::Accuracy),
            "micro-f1" => Ok(Self::MicroF1),
            "macro-f1" => Ok(Self::MacroF1),
            other => Err(format!("unknown ranking key {other:?} (accuracy, micro-f1, macro-f1)")),
        }
    }
}

fn check_rankings(ranked: &[Vec<String>], k: usize) -> Result<(), MetricsError> {
    if k == 0 {
        return Err(MetricsError::InvalidK);
    }
    match ranked.iter().position(Vec::is_empty) {
        Some(i) => Err(MetricsError::EmptyRanking(i)),
        None => Ok(()),
    }
}

/// Top-k accuracy and set-based top-k F1. Rankings shorter than `k` are used
/// as they are.
pub fn topk_metrics(truth: &[String], ranked: &[Vec<String>], k: usize) -> Result<(f64, f64), MetricsError> {
    check_lengths(truth.len(), ranked.len())?;
    check_rankings(ranked, k)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (t, r) in truth.iter().zip(ranked) {
        let top = &r[..k.min(r.len())];
        if top.contains(t) {
            tp += 1;
        } else {
            fn_ += 1;
        }
        fp += top.iter().filter(|p| *p != t).count();
    }
    let acc = tp as f64 / truth.len() as f64;
    Ok((acc, f1(tp as f64, fp as f64, fn_ as f64)))
}

/// Full report for rankings of labels, best first.
pub fn evaluate_single_label(truth: &[String], ranked: &[Vec<String>], k: usize) -> Result<MetricReport, MetricsError> {
    check_lengths(truth.len(), ranked.len())?;
    check_rankings(ranked, k)?;
    let top1: Vec<String> = ranked.iter().map(|r| r[0].clone()).collect();
    let confusion = confusion_matrix(truth, &top1)?;
    let n = truth.len();

    let correct: u64 = (0..confusion.class_names.len()).map(|i| confusion.counts[i][i]).sum();
    let accuracy = correct as f64 / n as f64;

    let (mut tp_all, mut fp_all, mut fn_all) = (0u64, 0u64, 0u64);
    let truth_classes: BTreeSet<&String> = truth.iter().collect();
    let mut per_class_f1 = Vec::new();
    for (i, name) in confusion.class_names.iter().enumerate() {
        let tp = confusion.counts[i][i];
        let row: u64 = confusion.counts[i].iter().sum();
        let col: u64 = confusion.counts.iter().map(|r| r[i]).sum();
        let (fp, fn_) = (col - tp, row - tp);
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        if truth_classes.contains(name) {
            per_class_f1.push((name.clone(), f1(tp as f64, fp as f64, fn_ as f64)));
        }
    }
    let micro_f1 = f1(tp_all as f64, fp_all as f64, fn_all as f64);
    let macro_f1 = per_class_f1.iter().map(|(_, f)| f).sum::<f64>() / per_class_f1.len() as f64;
    assert!(
        (micro_f1 - accuracy).abs() < 1e-12,
        "single-label identity violated: micro-F1 {micro_f1} vs accuracy {accuracy}"
    );
    let (top_k_accuracy, top_k_f1) = topk_metrics(truth, ranked, k)?;

    Ok(MetricReport {
        n,
        accuracy,
        micro_f1,
        macro_f1,
        k,
        top_k_accuracy,
        top_k_f1,
        per_class_f1,
        macro_average_over: "classes-present-in-truth".into(),
        confusion,
    })
}
