use serde::{Deserialize, Serialize};

use super::CascadeError;
use crate::{
    learner::{MARKER_CLOSE, MARKER_OPEN},
    ontology::Relation,
};

/// Shape of the markers appended to a report. Each marker reads
/// `⟦{tag} {relation}={value}⟧`; markers follow the text, each preceded by
/// `separator`. The bracket glyphs are fixed because the tokenizer keys on
/// them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationTemplate {
    pub tag: String,
    pub separator: String,
}

impl Default for AugmentationTemplate {
    fn default() -> Self {
        Self { tag: "REL".into(), separator: " ".into() }
    }
}

impl AugmentationTemplate {
    pub fn validate(&self) -> Result<(), CascadeError> {
        let bad = |s: &str| s.contains(MARKER_OPEN) || s.contains(MARKER_CLOSE) || s.contains('=');
        if bad(&self.tag) || bad(&self.separator) || self.tag.trim().is_empty() {
            return Err(CascadeError::InvalidTemplate(format!(
                "tag {:?} / separator {:?} must be non-empty and free of marker glyphs",
                self.tag, self.separator
            )));
        }
        Ok(())
    }

    pub fn marker(&self, relation: Relation, value: &str) -> String {
        format!("{MARKER_OPEN}{} {}={}{MARKER_CLOSE}", self.tag, relation.as_str(), value)
    }

    /// Appends one marker per pair. Values are taken as given.
    pub fn apply(&self, text: &str, known: &[(Relation, &str)]) -> String {
        let mut out = String::from(text);
        for &(r, v) in known {
            out.push_str(&self.separator);
            out.push_str(&self.marker(r, v));
        }
        out
    }
}

/// `text` with a default-template marker for each `(relation, value)` pair,
/// both given by name. Names and values are checked against the closed
/// relation enums.
pub fn augment_input(text: &str, known: &[(&str, &str)]) -> Result<String, CascadeError> {
    let parsed = known
        .iter()
        .map(|&(name, value)| {
            let r: Relation = name.parse().map_err(|_| CascadeError::UnknownRelation(name.to_string()))?;
            Ok((r, r.parse_value(value)?))
        })
        .collect::<Result<Vec<_>, CascadeError>>()?;
    Ok(AugmentationTemplate::default().apply(text, &parsed))
}
