//! Review sampling and inter-rater agreement for the anonymization check.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::AnonymizeError;
use crate::{
    corpus::{proportional_allocation, LabeledCorpus},
    rng,
};

/// Stratified review sample split into two equally sized reviewer subsets
/// that overlap on `shared`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewPartition {
    pub sample: LabeledCorpus,
    pub subset_a: BTreeSet<String>,
    pub subset_b: BTreeSet<String>,
    pub shared: BTreeSet<String>,
}

impl ReviewPartition {
    pub fn unique_a(&self) -> impl Iterator<Item = &String> {
        self.subset_a.difference(&self.shared)
    }

    pub fn unique_b(&self) -> impl Iterator<Item = &String> {
        self.subset_b.difference(&self.shared)
    }
}

/// Draws a label-stratified sample of `round(fraction * N)` records and
/// splits it into two subsets of equal size sharing
/// `round(overlap_fraction * |sample|)` records.
///
/// Equal subset sizes need an even number of non-shared records; when the
/// remainder is odd the shared set grows by one.
pub fn generate_review_partition(
    corpus: &LabeledCorpus,
    fraction: f64,
    overlap_fraction: f64,
    seed: u64,
) -> Result<ReviewPartition, AnonymizeError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AnonymizeError::InvalidFraction { name: "fraction", value: fraction });
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(AnonymizeError::InvalidFraction { name: "overlap fraction", value: overlap_fraction });
    }
    let total = (fraction * corpus.len() as f64).round() as usize;
    if total == 0 {
        return Err(AnonymizeError::SampleTooSmall(format!(
            "fraction {fraction} of {} records rounds to an empty sample",
            corpus.len()
        )));
    }

    let mut rng = rng::stream(seed, "review-sample");
    let labels: Vec<(&String, &usize)> = corpus.label_counts().iter().collect();
    let quotas = proportional_allocation(&labels.iter().map(|(_, &c)| c).collect::<Vec<_>>(), total);
    let mut sample_ids = BTreeSet::new();
    for ((label, _), quota) in labels.iter().zip(quotas) {
        let mut ids: Vec<&String> = corpus.records().iter().filter(|r| &r.label == *label).map(|r| &r.id).collect();
        ids.shuffle(&mut rng);
        sample_ids.extend(ids.into_iter().take(quota).cloned());
    }
    let sample = corpus.subset(&sample_ids);

    let mut shared_n = (overlap_fraction * total as f64).round() as usize;
    if overlap_fraction > 0.0 && shared_n == 0 {
        return Err(AnonymizeError::SampleTooSmall(format!(
            "overlap {overlap_fraction} of a {total}-record sample rounds to no shared records"
        )));
    }
    if (total - shared_n) % 2 == 1 {
        shared_n += 1;
    }

    let mut order: Vec<String> = sample.records().iter().map(|r| r.id.clone()).collect();
    order.shuffle(&mut rng::stream(seed, "review-overlap"));
    let shared: BTreeSet<String> = order[..shared_n].iter().cloned().collect();
    let mut subset_a = shared.clone();
    let mut subset_b = shared.clone();
    for (i, id) in order[shared_n..].iter().enumerate() {
        if i % 2 == 0 {
            subset_a.insert(id.clone());
        } else {
            subset_b.insert(id.clone());
        }
    }
    Ok(ReviewPartition { sample, subset_a, subset_b, shared })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Judgment {
    Correct,
    OverMasked,
    UnderMasked,
}

impl Judgment {
    pub const ALL: [Judgment; 3] = [Judgment::Correct, Judgment::OverMasked, Judgment::UnderMasked];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub record_id: String,
    pub reviewer_id: String,
    pub judgment: Judgment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Unix epoch milliseconds.
    pub timestamp: u64,
    /// Replaces this reviewer's earlier verdict on the same record.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub supersedes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub reviewers: [String; 2],
    pub shared: usize,
    pub matching: usize,
    pub raw_agreement: f64,
    pub kappa: f64,
    pub disagreements: BTreeSet<String>,
}

/// Raw agreement and Cohen's kappa over the shared records. `verdicts` must
/// hold at most one verdict per (record, reviewer) and come from exactly two
/// reviewers on the shared set.
pub fn compute_agreement(verdicts: &[Verdict], partition: &ReviewPartition) -> Result<Agreement, AnonymizeError> {
    if partition.shared.is_empty() {
        return Err(AnonymizeError::NoSharedRecords);
    }
    let mut by_reviewer: BTreeMap<&str, BTreeMap<&str, Judgment>> = BTreeMap::new();
    for v in verdicts.iter().filter(|v| partition.shared.contains(&v.record_id)) {
        let slot = by_reviewer.entry(&v.reviewer_id).or_default();
        if slot.insert(&v.record_id, v.judgment).is_some() {
            return Err(AnonymizeError::DuplicateVerdict {
                record_id: v.record_id.clone(),
                reviewer_id: v.reviewer_id.clone(),
            });
        }
    }
    if by_reviewer.len() > 2 {
        return Err(AnonymizeError::ReviewerCount(by_reviewer.len()));
    }
    let reviewers: Vec<&str> = by_reviewer.keys().copied().collect();
    let ja = reviewers.first().and_then(|r| by_reviewer.get(r));
    let jb = reviewers.get(1).and_then(|r| by_reviewer.get(r));

    let mut pairs = Vec::with_capacity(partition.shared.len());
    for id in &partition.shared {
        match (ja.and_then(|m| m.get(id.as_str())), jb.and_then(|m| m.get(id.as_str()))) {
            (Some(&a), Some(&b)) => pairs.push((id, a, b)),
            _ => return Err(AnonymizeError::MissingVerdict(id.clone())),
        }
    }

    let n = pairs.len() as f64;
    let matching = pairs.iter().filter(|(_, a, b)| a == b).count();
    let po = matching as f64 / n;
    let pe: f64 = Judgment::ALL
        .iter()
        .map(|j| {
            let ca = pairs.iter().filter(|(_, a, _)| a == j).count() as f64;
            let cb = pairs.iter().filter(|(_, _, b)| b == j).count() as f64;
            (ca / n) * (cb / n)
        })
        .sum();
    // pe == 1 only when both reviewers used one identical category throughout
    let kappa = if (1.0 - pe).abs() < f64::EPSILON { 1.0 } else { (po - pe) / (1.0 - pe) };

    Ok(Agreement {
        reviewers: [reviewers[0].to_string(), reviewers[1].to_string()],
        shared: pairs.len(),
        matching,
        raw_agreement: po,
        kappa,
        disagreements: pairs.iter().filter(|(_, a, b)| a != b).map(|(id, _, _)| (*id).clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ClinicalRecord;

    fn corpus(n_per_label: &[usize]) -> LabeledCorpus {
        let mut recs = Vec::new();
        for (l, &n) in n_per_label.iter().enumerate() {
            for i in 0..n {
                recs.push(ClinicalRecord::new(format!("{l}-{i}"), "texto", &format!("label{l}")));
            }
        }
        LabeledCorpus::new(recs).unwrap()
    }

    fn verdict(id: &str, reviewer: &str, j: Judgment) -> Verdict {
        Verdict {
            record_id: id.into(),
            reviewer_id: reviewer.into(),
            judgment: j,
            note: None,
            timestamp: 0,
            supersedes: false,
        }
    }

    #[test]
    fn full_fraction_without_overlap_halves_corpus() {
        let c = corpus(&[10, 6]);
        let p = generate_review_partition(&c, 1.0, 0.0, 3).unwrap();
        assert_eq!(p.sample.len(), 16);
        assert!(p.shared.is_empty());
        assert_eq!(p.subset_a.len(), 8);
        assert_eq!(p.subset_b.len(), 8);
        assert!(p.subset_a.is_disjoint(&p.subset_b));
    }

    #[test]
    fn odd_remainder_grows_shared_set() {
        let c = corpus(&[7]);
        let p = generate_review_partition(&c, 1.0, 0.0, 3).unwrap();
        assert_eq!(p.shared.len(), 1);
        assert_eq!(p.subset_a.len(), p.subset_b.len());
    }

    #[test]
    fn tiny_sample_cannot_hold_overlap() {
        let c = corpus(&[3]);
        assert!(matches!(generate_review_partition(&c, 1.0, 0.1, 1), Err(AnonymizeError::SampleTooSmall(_))));
        assert!(generate_review_partition(&c, 0.0, 0.0, 1).is_err());
        assert!(generate_review_partition(&c, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let c = corpus(&[40, 25, 13]);
        let a = generate_review_partition(&c, 0.5, 0.2, 11).unwrap();
        let b = generate_review_partition(&c, 0.5, 0.2, 11).unwrap();
        assert_eq!(a, b);
        let d = generate_review_partition(&c, 0.5, 0.2, 12).unwrap();
        assert_ne!(a.subset_a, d.subset_a);
    }

    #[test]
    fn perfect_agreement() {
        let c = corpus(&[20]);
        let p = generate_review_partition(&c, 1.0, 0.5, 0).unwrap();
        let mut v = Vec::new();
        for (i, id) in p.shared.iter().enumerate() {
            let j = Judgment::ALL[i % 3];
            v.push(verdict(id, "a", j));
            v.push(verdict(id, "b", j));
        }
        let ag = compute_agreement(&v, &p).unwrap();
        assert_eq!(ag.raw_agreement, 1.0);
        assert_eq!(ag.kappa, 1.0);
        assert!(ag.disagreements.is_empty());
    }

    #[test]
    fn single_category_agreement_has_unit_kappa() {
        let c = corpus(&[10]);
        let p = generate_review_partition(&c, 1.0, 0.4, 0).unwrap();
        let v: Vec<_> = p
            .shared
            .iter()
            .flat_map(|id| [verdict(id, "a", Judgment::Correct), verdict(id, "b", Judgment::Correct)])
            .collect();
        assert_eq!(compute_agreement(&v, &p).unwrap().kappa, 1.0);
    }

    #[test]
    fn missing_and_duplicate_verdicts() {
        let c = corpus(&[10]);
        let p = generate_review_partition(&c, 1.0, 0.4, 0).unwrap();
        let first = p.shared.iter().next().unwrap().clone();
        let mut v: Vec<_> = p
            .shared
            .iter()
            .skip(1)
            .flat_map(|id| [verdict(id, "a", Judgment::Correct), verdict(id, "b", Judgment::Correct)])
            .collect();
        v.push(verdict(&first, "a", Judgment::Correct));
        match compute_agreement(&v, &p) {
            Err(AnonymizeError::MissingVerdict(id)) => assert_eq!(id, first),
            other => panic!("unexpected {other:?}"),
        }
        v.push(verdict(&first, "a", Judgment::OverMasked));
        assert!(matches!(compute_agreement(&v, &p), Err(AnonymizeError::DuplicateVerdict { .. })));
    }
}
