//! Spanish label to English concept name translation.

use std::{collections::BTreeMap, path::Path, sync::Mutex};

use super::OntologyError;
use crate::corpus::normalize_label;

const REFERENCE_TRANSLATION: &str = include_str!("../../assets/ontology/translation.tsv");

/// Fallback translator for labels absent from the static map, e.g. a
/// machine-translation service. Calls are serialized by [`TranslationMap`].
pub trait TranslationClient: Send {
    /// `Ok(None)` when the client has no translation for `spanish`.
    fn translate(&mut self, spanish: &str) -> Result<Option<String>, String>;
}

#[derive(Default)]
pub struct TranslationMap {
    entries: BTreeMap<String, String>,
    client: Option<Mutex<Box<dyn TranslationClient>>>,
    cache: Mutex<BTreeMap<String, String>>,
}

impl std::fmt::Debug for TranslationMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TranslationMap")
            .field("entries", &self.entries.len())
            .field("client", &self.client.is_some())
            .finish()
    }
}

impl TranslationMap {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            entries: entries.into_iter().map(|(k, v)| (normalize_label(&k), normalize_label(&v))).collect(),
            ..Self::default()
        }
    }

    /// Map shipped alongside the reference snapshot.
    pub fn reference() -> Self {
        Self::parse(REFERENCE_TRANSLATION).expect("shipped translation map is valid")
    }

    pub fn with_client(mut self, client: Box<dyn TranslationClient>) -> Self {
        self.client = Some(Mutex::new(client));
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Two-column TSV `spanish_label<TAB>english_name`; `#` comments allowed.
    /// A first line reading `spanish_label<TAB>english_name` is treated as a
    /// header.
    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let (es, en) = raw
                .split_once('\t')
                .ok_or(OntologyError::Schema { line: idx + 1, message: "expected two tab-separated columns".into() })?;
            if es.trim() == "spanish_label" && en.trim() == "english_name" {
                continue;
            }
            if es.trim().is_empty() || en.trim().is_empty() || en.contains('\t') {
                return Err(OntologyError::Schema { line: idx + 1, message: "expected two non-empty columns".into() });
            }
            entries.push((es.to_string(), en.to_string()));
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, OntologyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| OntologyError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// English concept name for a Spanish label. Falls back to the client
    /// (caching its answers) when the label is absent from the map.
    pub fn translate_label(&self, label: &str) -> Result<String, OntologyError> {
        let label = normalize_label(label);
        if let Some(en) = self.entries.get(&label) {
            return Ok(en.clone());
        }
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&label) {
            return Ok(hit.clone());
        }
        let Some(client) = &self.client else {
            return Err(OntologyError::UnresolvedLabel(label));
        };
        let answer = client
            .lock()
            .expect("translation client poisoned")
            .translate(&label)
            .map_err(|message| OntologyError::Client { label: label.clone(), message })?;
        match answer {
            Some(en) => {
                let en = normalize_label(&en);
                self.cache.lock().expect("cache poisoned").insert(label, en.clone());
                Ok(en)
            }
            None => Err(OntologyError::UnresolvedLabel(label)),
        }
    }
}
