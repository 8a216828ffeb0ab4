//! Deterministic synthetic corpus with a known relation structure.
//!
//! Twenty-five diseases sit on a 5 x 5 grid of pathology types and
//! anatomical sites, so each disease is exactly one (type, site) pair.
//! Severity is assigned per disease in balanced pseudo-random fashion and
//! carries no information beyond the disease itself.
//!
//! A report mixes generic filler with a few type hint words and a few site
//! hint words. Each hint vocabulary is large, so any one word is rare per
//! disease but common per type or site. A fraction of hints is drawn from a
//! wrong type or site. Pooling over the grid's rows and columns is what a
//! relation stage can exploit and a flat disease classifier cannot.

use std::collections::{BTreeMap, BTreeSet};

use rand::{seq::SliceRandom, Rng};
use serde::{Deserialize, Serialize};

use crate::{
    corpus::{ClinicalRecord, LabeledCorpus},
    ontology::{
        AnatomicalSite, OntologySnapshot, PathologyType, RelationTriple, Severity, SeverityFlag, SnapshotEntry,
        TranslationMap,
    },
    rng,
};

pub const TYPES: [PathologyType; 5] = [
    PathologyType::Infection,
    PathologyType::BenignTumor,
    PathologyType::AutoimmuneProcess,
    PathologyType::NeoplasticProcess,
    PathologyType::Syndrome,
];

pub const SITES: [AnatomicalSite; 5] =
    [AnatomicalSite::Skin, AnatomicalSite::Face, AnatomicalSite::Hand, AnatomicalSite::Leg, AnatomicalSite::Mouth];

/// Generation knobs. The defaults produce the shipped fixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub docs_per_disease: usize,
    /// Distinct hint words per type and per site.
    pub hint_vocabulary: usize,
    pub type_hints: usize,
    pub site_hints: usize,
    /// Probability that a hint word comes from a wrong type or site.
    pub hint_noise: f64,
    pub filler_vocabulary: usize,
    pub filler_words: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            docs_per_disease: 200,
            hint_vocabulary: 100,
            type_hints: 4,
            site_hints: 4,
            hint_noise: 0.2,
            filler_vocabulary: 400,
            filler_words: 18,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub corpus: LabeledCorpus,
    pub triples: BTreeMap<String, RelationTriple>,
    pub snapshot: OntologySnapshot,
    /// Spanish label -> English concept name pairs.
    pub translations: Vec<(String, String)>,
}

impl SyntheticFixture {
    pub fn translation_map(&self) -> TranslationMap {
        TranslationMap::new(self.translations.iter().cloned())
    }

    pub fn translation_tsv(&self) -> String {
        let mut out = String::from("spanish_label\tenglish_name\n");
        for (es, en) in &self.translations {
            out.push_str(&format!("{es}\t{en}\n"));
        }
        out
    }
}

const SYLLABLES: [&str; 24] = [
    "ba", "ce", "di", "fo", "gu", "la", "me", "ni", "po", "ru", "sa", "te", "vi", "zo", "cha", "lle", "ra", "mo", "nu",
    "pe", "qui", "so", "ta", "xe",
];

/// `n` fresh pseudo-words of three syllables, none already in `taken`.
fn words(n: usize, taken: &mut BTreeSet<String>, rng: &mut impl Rng) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w: String = (0..3).map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())]).collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn type_word(t: PathologyType) -> &'static str {
    match t {
        PathologyType::Infection => "infecciosa",
        PathologyType::BenignTumor => "tumoral benigna",
        PathologyType::AutoimmuneProcess => "autoinmune",
        PathologyType::NeoplasticProcess => "neoplásica",
        _ => "sindrómica",
    }
}

fn site_word(s: AnatomicalSite) -> &'static str {
    match s {
        AnatomicalSite::Skin => "cutánea",
        AnatomicalSite::Face => "facial",
        AnatomicalSite::Hand => "de la mano",
        AnatomicalSite::Leg => "de la pierna",
        _ => "oral",
    }
}

fn flags_for(severity: Severity) -> BTreeSet<SeverityFlag> {
    match severity {
        Severity::Inoffensive => BTreeSet::new(),
        Severity::Light => [SeverityFlag::Minor].into(),
        Severity::Important => [SeverityFlag::Major].into(),
        Severity::Extreme => [SeverityFlag::Morbidity].into(),
    }
}

/// Builds the fixture for `spec`; identical specs give identical fixtures.
pub fn generate(spec: &SyntheticSpec) -> SyntheticFixture {
    let mut rng = rng::stream(spec.seed, "synthetic");
    let mut taken = BTreeSet::new();
    let filler = words(spec.filler_vocabulary, &mut taken, &mut rng);
    let type_vocab: Vec<Vec<String>> =
        TYPES.iter().map(|_| words(spec.hint_vocabulary, &mut taken, &mut rng)).collect();
    let site_vocab: Vec<Vec<String>> =
        SITES.iter().map(|_| words(spec.hint_vocabulary, &mut taken, &mut rng)).collect();

    let mut severities: Vec<Severity> =
        (0..TYPES.len() * SITES.len()).map(|i| Severity::ALL[i % Severity::ALL.len()]).collect();
    severities.shuffle(&mut rng);

    let mut triples = BTreeMap::new();
    let mut snapshot = OntologySnapshot::default();
    let mut translations = Vec::new();
    let mut diseases = Vec::new();
    for (ti, &t) in TYPES.iter().enumerate() {
        for (si, &s) in SITES.iter().enumerate() {
            let label = format!("dermatosis {} {}", type_word(t), site_word(s));
            let english = format!("synthetic {} of {}", t.as_str(), s.as_str());
            let gr = severities[ti * SITES.len() + si];
            triples.insert(label.clone(), RelationTriple::new(t, gr, s));
            snapshot.insert(
                &english,
                SnapshotEntry {
                    semantic_type: Some(t),
                    finding_site: Some(s),
                    severity_flags: Some(flags_for(gr)),
                    source_codes: BTreeMap::new(),
                },
            );
            translations.push((label.clone(), english));
            diseases.push((label, ti, si));
        }
    }

    let pick_hint = |vocab: &[Vec<String>], own: usize, rng: &mut rand_chacha::ChaCha8Rng| -> String {
        let group = if rng.gen_bool(spec.hint_noise) {
            // any group other than the true one
            let g = rng.gen_range(0..vocab.len() - 1);
            if g >= own {
                g + 1
            } else {
                g
            }
        } else {
            own
        };
        vocab[group][rng.gen_range(0..vocab[group].len())].clone()
    };

    let mut records = Vec::with_capacity(diseases.len() * spec.docs_per_disease);
    for (di, (label, ti, si)) in diseases.iter().enumerate() {
        for j in 0..spec.docs_per_disease {
            let mut tokens: Vec<String> =
                (0..spec.filler_words).map(|_| filler[rng.gen_range(0..filler.len())].clone()).collect();
            tokens.extend((0..spec.type_hints).map(|_| pick_hint(&type_vocab, *ti, &mut rng)));
            tokens.extend((0..spec.site_hints).map(|_| pick_hint(&site_vocab, *si, &mut rng)));
            tokens.shuffle(&mut rng);
            records.push(ClinicalRecord::new(format!("syn-{di:02}-{j:04}"), tokens.join(" "), label));
        }
    }
    translations.sort();
    SyntheticFixture {
        corpus: LabeledCorpus::new(records).expect("generated ids are unique"),
        triples,
        snapshot,
        translations,
    }
}

/// The shipped fixture: `generate(&SyntheticSpec::default())`.
pub fn reference_fixture() -> SyntheticFixture {
    generate(&SyntheticSpec::default())
}
