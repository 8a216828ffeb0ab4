//! Local ontology snapshot.
//!
//! TSV with a header row and the columns
//! `english_name  semantic_type  finding_site  severity_flags  codes`.
//! `severity_flags` is `;`-joined (`minor`, `major`, `morbidity`), empty for
//! no flags, or `?` when the severity component is unknown. `codes` is
//! `ontology=code;...` and is kept as provenance only. Lines starting with
//! `#` and blank lines are ignored. An empty semantic type or finding site
//! marks that component as missing.

use std::{
    collections::{BTreeMap, BTreeSet},
    path::Path,
};

use serde::{Deserialize, Serialize};

use super::{AnatomicalSite, OntologyError, PathologyType, SeverityFlag};

pub const SNAPSHOT_HEADER: [&str; 5] = ["english_name", "semantic_type", "finding_site", "severity_flags", "codes"];

const REFERENCE_SNAPSHOT: &str = include_str!("../../assets/ontology/snapshot.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub semantic_type: Option<PathologyType>,
    pub finding_site: Option<AnatomicalSite>,
    /// `None` when the severity component is unknown.
    pub severity_flags: Option<BTreeSet<SeverityFlag>>,
    pub source_codes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologySnapshot {
    entries: BTreeMap<String, SnapshotEntry>,
}

impl OntologySnapshot {
    /// The shipped snapshot covering the dermatology nomenclature.
    pub fn reference() -> Self {
        Self::parse(REFERENCE_SNAPSHOT).expect("shipped snapshot is valid")
    }

    pub fn get(&self, english_name: &str) -> Option<&SnapshotEntry> {
        self.entries.get(english_name)
    }

    pub fn contains(&self, english_name: &str) -> bool {
        self.entries.contains_key(english_name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &SnapshotEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, english_name: &str, entry: SnapshotEntry) {
        self.entries.insert(crate::corpus::normalize_label(english_name), entry);
    }

    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        let mut entries = BTreeMap::new();
        let mut header_seen = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let schema = |message: String| OntologyError::Schema { line: line_no, message };
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if !header_seen {
                header_seen = true;
                if cols.iter().map(|c| c.trim()).eq(SNAPSHOT_HEADER.iter().copied()) {
                    continue;
                }
                return Err(schema(format!("expected header {:?}", SNAPSHOT_HEADER.join("\t"))));
            }
            if cols.len() != SNAPSHOT_HEADER.len() {
                return Err(schema(format!("expected {} columns, found {}", SNAPSHOT_HEADER.len(), cols.len())));
            }
            let name = crate::corpus::normalize_label(cols[0]);
            if name.is_empty() {
                return Err(schema("empty english_name".into()));
            }
            let semantic_type = optional(cols[1]).map(str::parse).transpose().map_err(|e| schema(format!("{e}")))?;
            let finding_site = optional(cols[2]).map(str::parse).transpose().map_err(|e| schema(format!("{e}")))?;
            let severity_flags = match cols[3].trim() {
                "?" => None,
                flags => Some(
                    flags
                        .split(';')
                        .map(str::trim)
                        .filter(|f| !f.is_empty())
                        .map(str::parse::<SeverityFlag>)
                        .collect::<Result<BTreeSet<_>, _>>()
                        .map_err(|e| schema(format!("{e}")))?,
                ),
            };
            let mut source_codes = BTreeMap::new();
            for pair in cols[4].split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| schema(format!("malformed code {pair:?}, expected ontology=code")))?;
                source_codes.insert(k.trim().to_lowercase(), v.trim().to_string());
            }
            let entry = SnapshotEntry { semantic_type, finding_site, severity_flags, source_codes };
            if entries.insert(name.clone(), entry).is_some() {
                return Err(schema(format!("duplicate english_name {name:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = SNAPSHOT_HEADER.join("\t");
        out.push('\n');
        for (name, e) in &self.entries {
            let flags = match &e.severity_flags {
                None => "?".to_string(),
                Some(f) => f.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(";"),
            };
            let codes = e.source_codes.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
            out.push_str(&format!(
                "{name}\t{}\t{}\t{flags}\t{codes}\n",
                e.semantic_type.map_or("", |t| t.as_str()),
                e.finding_site.map_or("", |s| s.as_str()),
            ));
        }
        out
    }
}

fn optional(col: &str) -> Option<&str> {
    let c = col.trim();
    (!c.is_empty()).then_some(c)
}

pub fn load_snapshot(path: &Path) -> Result<OntologySnapshot, OntologyError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| OntologyError::Io { path: path.display().to_string(), source })?;
    OntologySnapshot::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_has_47_entries() {
        assert_eq!(OntologySnapshot::reference().len(), 47);
    }

    #[test]
    fn empty_file_is_empty_snapshot() {
        assert!(OntologySnapshot::parse("").unwrap().is_empty());
        assert!(OntologySnapshot::parse("# only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn bad_flag_names_line() {
        let text = "english_name\tsemantic_type\tfinding_site\tseverity_flags\tcodes\n\
                    acne\tenfermedad\ttodo\tminor\t\n\
                    thing\tenfermedad\ttodo\thuge\t\n";
        match OntologySnapshot::parse(text) {
            Err(OntologyError::Schema { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("huge"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_site_rejected() {
        let text = "english_name\tsemantic_type\tfinding_site\tseverity_flags\tcodes\nx\tenfermedad\tnariz\t\t\n";
        assert!(matches!(OntologySnapshot::parse(text), Err(OntologyError::Schema { line: 2, .. })));
    }

    #[test]
    fn tsv_round_trip() {
        let snap = OntologySnapshot::reference();
        assert_eq!(OntologySnapshot::parse(&snap.to_tsv()).unwrap(), snap);
    }

    #[test]
    fn missing_components_parse_as_none() {
        let text = "english_name\tsemantic_type\tfinding_site\tseverity_flags\tcodes\nx\t\ttodo\t?\tmeddra=1\n";
        let snap = OntologySnapshot::parse(text).unwrap();
        let e = snap.get("x").unwrap();
        assert!(e.semantic_type.is_none());
        assert!(e.severity_flags.is_none());
        assert_eq!(e.source_codes["meddra"], "1");
    }
}
