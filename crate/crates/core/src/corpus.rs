//! Labeled clinical report corpora.
//!
//! Corpora are read from either JSONL (`{"id": .., "text": .., "label": ..}`
//! per line) or CSV with an `id,text,label` header. Labels are normalized on
//! ingestion: trimmed, lowercased, internal whitespace collapsed.

use std::{
    collections::{BTreeMap, BTreeSet},
    fmt,
    fs::File,
    io::{BufRead, BufReader, Read, Write},
    path::Path,
    str::FromStr,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("no classes survive threshold {0}")]
    NoClassesSurvive(usize),
    #[error("min count must be at least 1")]
    InvalidMinCount,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("stratified split needs at least 2 records per label; offending labels: {0:?}")]
    LabelsTooSmall(Vec<String>),
    #[error("corpus has {0} records, cannot split into two non-empty parts")]
    TooFewRecords(usize),
    #[error("unknown corpus format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
}

/// One de-identified report with its pathology label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub id: String,
    pub text: String,
    pub label: String,
}

impl ClinicalRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: &str) -> Self {
        Self { id: id.into(), text: text.into(), label: normalize_label(label) }
    }
}

/// Lowercase, trim and collapse internal whitespace.
pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Self::Jsonl),
            "csv" => Ok(Self::Csv),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Jsonl => "jsonl",
            Self::Csv => "csv",
        })
    }
}

/// Ordered records plus the per-label counts derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledCorpus {
    records: Vec<ClinicalRecord>,
    label_counts: BTreeMap<String, usize>,
}

impl LabeledCorpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(records: Vec<ClinicalRecord>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Self::from_unique(records))
    }

    fn from_unique(records: Vec<ClinicalRecord>) -> Self {
        let mut label_counts = BTreeMap::new();
        for r in &records {
            *label_counts.entry(r.label.clone()).or_insert(0) += 1;
        }
        Self { records, label_counts }
    }

    pub fn records(&self) -> &[ClinicalRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ClinicalRecord> {
        self.records
    }

    pub fn label_counts(&self) -> &BTreeMap<String, usize> {
        &self.label_counts
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.label_counts.keys().map(String::as_str)
    }

    pub fn num_labels(&self) -> usize {
        self.label_counts.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.records.iter().map(|r| r.text.clone()).collect()
    }

    pub fn label_sequence(&self) -> Vec<String> {
        self.records.iter().map(|r| r.label.clone()).collect()
    }

    /// Keeps records matching `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&ClinicalRecord) -> bool) -> Self {
        Self::from_unique(self.records.iter().filter(|r| keep(r)).cloned().collect())
    }

    /// Records whose ids are in `ids`, preserving corpus order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Self {
        self.filter(|r| ids.contains(&r.id))
    }
}

impl Serialize for LabeledCorpus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.records.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledCorpus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let records = Vec::<ClinicalRecord>::deserialize(d)?;
        Self::new(records).map_err(serde::de::Error::custom)
    }
}

#[derive(Deserialize)]
struct RawRow {
    id: Option<String>,
    text: Option<String>,
    label: Option<String>,
}

fn validate_row(row: usize, raw: RawRow) -> Result<ClinicalRecord, CorpusError> {
    let label = raw.label.unwrap_or_default();
    if label.trim().is_empty() {
        return Err(CorpusError::Row { row, message: "missing or blank label".into() });
    }
    let text = raw.text.ok_or_else(|| CorpusError::Row { row, message: "missing text".into() })?;
    if text.trim().is_empty() {
        return Err(CorpusError::Row { row, message: "blank text".into() });
    }
    let id = match raw.id {
        Some(id) if !id.trim().is_empty() => id,
        _ => return Err(CorpusError::Row { row, message: "missing id".into() }),
    };
    Ok(ClinicalRecord::new(id, text, &label))
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LabeledCorpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    read_corpus(BufReader::new(file), format)
}

/// Parses a corpus from any reader. Row indices in errors are 0-based data
/// rows (the CSV header is not counted).
pub fn read_corpus(reader: impl Read, format: CorpusFormat) -> Result<LabeledCorpus, CorpusError> {
    let records = match format {
        CorpusFormat::Jsonl => read_jsonl(reader)?,
        CorpusFormat::Csv => read_csv(reader)?,
    };
    LabeledCorpus::new(records)
}

fn read_jsonl(reader: impl Read) -> Result<Vec<ClinicalRecord>, CorpusError> {
    let mut reader = BufReader::new(reader);
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut line = String::new();
    let mut row = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| CorpusError::Parse { offset, message: e.to_string() })?;
        if n == 0 {
            break;
        }
        if !line.trim().is_empty() {
            let raw: RawRow = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                offset: offset + line_col_to_offset(&line, e.column()),
                message: e.to_string(),
            })?;
            records.push(validate_row(row, raw)?);
            row += 1;
        }
        offset += n as u64;
    }
    Ok(records)
}

fn line_col_to_offset(line: &str, column: usize) -> u64 {
    // serde_json columns are 1-based character positions
    line.char_indices().nth(column.saturating_sub(1)).map_or(line.len(), |(i, _)| i) as u64
}

fn read_csv(reader: impl Read) -> Result<Vec<ClinicalRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut records = Vec::new();
    for (row, result) in rdr.deserialize::<RawRow>().enumerate() {
        let raw = result
            .map_err(|e| CorpusError::Parse { offset: e.position().map_or(0, |p| p.byte()), message: e.to_string() })?;
        records.push(validate_row(row, raw)?);
    }
    Ok(records)
}

pub fn write_corpus(corpus: &LabeledCorpus, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    write_corpus_to(corpus, &mut w, format).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn write_corpus_to(corpus: &LabeledCorpus, w: &mut impl Write, format: CorpusFormat) -> std::io::Result<()> {
    match format {
        CorpusFormat::Jsonl => {
            for r in corpus.records() {
                serde_json::to_writer(&mut *w, r)?;
                w.write_all(b"\n")?;
            }
        }
        CorpusFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(w);
            for r in corpus.records() {
                wtr.serialize(r)?;
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

/// Keeps the records whose label occurs at least `min_count` times in the
/// input corpus.
pub fn filter_by_min_frequency(corpus: &LabeledCorpus, min_count: usize) -> Result<LabeledCorpus, CorpusError> {
    if min_count == 0 {
        return Err(CorpusError::InvalidMinCount);
    }
    let counts = corpus.label_counts();
    let out = corpus.filter(|r| counts[&r.label] >= min_count);
    if out.is_empty() {
        return Err(CorpusError::NoClassesSurvive(min_count));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: 42, stratified: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CorpusError::InvalidFraction(self.train_fraction));
        }
        Ok(())
    }
}

/// round(fraction * n) clamped so both sides keep at least one item.
fn train_quota(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Splits into (train, test). With `stratified`, every label is split
/// independently by the rounding rule; otherwise the whole corpus is.
pub fn stratified_split(
    corpus: &LabeledCorpus,
    spec: &SplitSpec,
) -> Result<(LabeledCorpus, LabeledCorpus), CorpusError> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, "split");
    let mut train_ids = BTreeSet::new();

    if spec.stratified {
        let small: Vec<String> = corpus.label_counts().iter().filter(|(_, &c)| c < 2).map(|(l, _)| l.clone()).collect();
        if !small.is_empty() {
            return Err(CorpusError::LabelsTooSmall(small));
        }
        for (label, &count) in corpus.label_counts() {
            let mut ids: Vec<&str> =
                corpus.records().iter().filter(|r| &r.label == label).map(|r| r.id.as_str()).collect();
            ids.shuffle(&mut rng);
            train_ids.extend(ids[..train_quota(spec.train_fraction, count)].iter().map(|s| s.to_string()));
        }
    } else {
        if corpus.len() < 2 {
            return Err(CorpusError::TooFewRecords(corpus.len()));
        }
        let mut ids: Vec<&str> = corpus.records().iter().map(|r| r.id.as_str()).collect();
        ids.shuffle(&mut rng);
        train_ids.extend(ids[..train_quota(spec.train_fraction, corpus.len())].iter().map(|s| s.to_string()));
    }

    let train = corpus.filter(|r| train_ids.contains(&r.id));
    let test = corpus.filter(|r| !train_ids.contains(&r.id));
    Ok((train, test))
}

/// Largest-remainder allocation of `total` items across groups proportional
/// to `sizes`; ties go to the earlier group. Each share stays within one of
/// `total * size / sum`.
pub(crate) fn proportional_allocation(sizes: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = sizes.iter().sum();
    if sum == 0 {
        return vec![0; sizes.len()];
    }
    let exact: Vec<f64> = sizes.iter().map(|&s| total as f64 * s as f64 / sum as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = total - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - alloc[a] as f64;
        let rb = exact[b] - alloc[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for i in order {
        if remaining == 0 {
            break;
        }
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            remaining -= 1;
        }
    }
    alloc
}
