//! Relation extraction: pathology label -> (type, severity, site).
//!
//! A Spanish label is translated to an English concept name, looked up in
//! the [`OntologySnapshot`], and its relation triple assembled from three
//! roles: the semantic type (UMLS role) gives the pathology type, the
//! finding site (SNOMED role) gives the anatomical site and the ICD-10
//! severity flags give the severity. MedDRA codes may appear in the
//! snapshot's provenance column but are never consulted.

mod relation;
mod snapshot;
mod translation;

use std::collections::BTreeSet;

use thiserror::Error;

pub use relation::{AnatomicalSite, PathologyType, Relation, RelationTriple, Severity, SeverityFlag, UnknownValue};
pub use snapshot::{load_snapshot, OntologySnapshot, SnapshotEntry, SNAPSHOT_HEADER};
pub use translation::{TranslationClient, TranslationMap};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("unresolved label {0:?}")]
    UnresolvedLabel(String),
    #[error("snapshot entry {concept:?} for label {label:?} is missing its {component}")]
    MissingRelation { label: String, concept: String, component: &'static str },
    #[error("schema error on line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("translation client failed for {label:?}: {message}")]
    Client { label: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How multiple severity flags resolve to one severity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeverityPrecedence {
    /// morbidity > major > minor.
    #[default]
    StrongestWins,
    /// The literal if/elif order minor, major, morbidity: the first flag
    /// checked wins. Kept for auditing against the original chain.
    CheckOrder,
}

/// Severity for a set of ICD-10 flags under the default precedence.
pub fn derive_severity(flags: &BTreeSet<SeverityFlag>) -> Severity {
    derive_severity_with(flags, SeverityPrecedence::StrongestWins)
}

pub fn derive_severity_with(flags: &BTreeSet<SeverityFlag>, precedence: SeverityPrecedence) -> Severity {
    let order: [SeverityFlag; 3] = match precedence {
        SeverityPrecedence::StrongestWins => [SeverityFlag::Morbidity, SeverityFlag::Major, SeverityFlag::Minor],
        SeverityPrecedence::CheckOrder => [SeverityFlag::Minor, SeverityFlag::Major, SeverityFlag::Morbidity],
    };
    order.into_iter().find(|f| flags.contains(f)).map_or(Severity::Inoffensive, |f| match f {
        SeverityFlag::Minor => Severity::Light,
        SeverityFlag::Major => Severity::Important,
        SeverityFlag::Morbidity => Severity::Extreme,
    })
}

/// Relation triple for a Spanish pathology label.
pub fn extract_relations(
    label: &str,
    map: &TranslationMap,
    snapshot: &OntologySnapshot,
) -> Result<RelationTriple, OntologyError> {
    extract_relations_with(label, map, snapshot, SeverityPrecedence::StrongestWins)
}

pub fn extract_relations_with(
    label: &str,
    map: &TranslationMap,
    snapshot: &OntologySnapshot,
    precedence: SeverityPrecedence,
) -> Result<RelationTriple, OntologyError> {
    let concept = map.translate_label(label)?;
    let entry =
        snapshot.get(&concept).ok_or_else(|| OntologyError::UnresolvedLabel(crate::corpus::normalize_label(label)))?;
    let missing = |component| OntologyError::MissingRelation {
        label: crate::corpus::normalize_label(label),
        concept: concept.clone(),
        component,
    };
    let path_type = entry.semantic_type.ok_or_else(|| missing("semantic type"))?;
    let site = entry.finding_site.ok_or_else(|| missing("finding site"))?;
    let flags = entry.severity_flags.as_ref().ok_or_else(|| missing("severity"))?;
    Ok(RelationTriple::new(path_type, derive_severity_with(flags, precedence), site))
}

/// Triples for every label, failing with the full list of labels that could
/// not be resolved.
pub fn extract_all<'a>(
    labels: impl IntoIterator<Item = &'a str>,
    map: &TranslationMap,
    snapshot: &OntologySnapshot,
) -> Result<std::collections::BTreeMap<String, RelationTriple>, OntologyError> {
    let mut out = std::collections::BTreeMap::new();
    let mut unresolved = Vec::new();
    for label in labels {
        match extract_relations(label, map, snapshot) {
            Ok(t) => {
                out.insert(crate::corpus::normalize_label(label), t);
            }
            Err(OntologyError::UnresolvedLabel(l)) => unresolved.push(l),
            Err(e) => return Err(e),
        }
    }
    if !unresolved.is_empty() {
        return Err(OntologyError::UnresolvedLabel(unresolved.join(", ")));
    }
    Ok(out)
}
