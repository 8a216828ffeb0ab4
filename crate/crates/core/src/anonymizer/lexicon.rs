use std::{collections::BTreeSet, path::Path};

use super::{tokens::letter_runs, AnonymizeError};

macro_rules! asset {
    ($name:literal) => {
        include_str!(concat!("../../assets/lexicons/", $name))
    };
}

/// File names looked up inside a lexicon directory.
pub const LEXICON_FILES: [&str; 6] = [
    "given_names.txt",
    "surnames.txt",
    "places.txt",
    "frequent_words.txt",
    "domain_exceptions.txt",
    "title_patterns.txt",
];

/// Word lists driving de-identification. Entries are lowercase phrases whose
/// tokens are joined by a single space.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconSet {
    pub given_names: BTreeSet<String>,
    pub surnames: BTreeSet<String>,
    pub places: BTreeSet<String>,
    pub frequent_words: BTreeSet<String>,
    pub domain_exceptions: BTreeSet<String>,
    pub title_patterns: BTreeSet<String>,
}

/// One entry per line, `#` starts a comment line, blank lines skipped.
pub fn parse_lexicon(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize_entry)
        .filter(|e| !e.is_empty())
        .collect()
}

fn normalize_entry(entry: &str) -> String {
    letter_runs(entry).map(|(_, _, w)| w.to_lowercase()).collect::<Vec<_>>().join(" ")
}

pub fn default_title_patterns() -> BTreeSet<String> {
    ["dr", "dra", "doctor", "doctora"].iter().map(|s| s.to_string()).collect()
}

impl LexiconSet {
    /// The seed lists shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            given_names: parse_lexicon(asset!("given_names.txt")),
            surnames: parse_lexicon(asset!("surnames.txt")),
            places: parse_lexicon(asset!("places.txt")),
            frequent_words: parse_lexicon(asset!("frequent_words.txt")),
            domain_exceptions: parse_lexicon(asset!("domain_exceptions.txt")),
            title_patterns: parse_lexicon(asset!("title_patterns.txt")),
        }
    }

    /// Reads the lexicon files from `dir`. Missing `frequent_words.txt`,
    /// `domain_exceptions.txt` or `title_patterns.txt` fall back to empty,
    /// empty and the default triggers respectively; the three name lists
    /// must not all be empty.
    pub fn load_dir(dir: &Path) -> Result<Self, AnonymizeError> {
        let read = |name: &str, required: bool| -> Result<Option<BTreeSet<String>>, AnonymizeError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(text) => Ok(Some(parse_lexicon(&text))),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound && !required => Ok(None),
                Err(source) => Err(AnonymizeError::Io { path: path.display().to_string(), source }),
            }
        };
        let set = Self {
            given_names: read("given_names.txt", true)?.unwrap_or_default(),
            surnames: read("surnames.txt", true)?.unwrap_or_default(),
            places: read("places.txt", true)?.unwrap_or_default(),
            frequent_words: read("frequent_words.txt", false)?.unwrap_or_default(),
            domain_exceptions: read("domain_exceptions.txt", false)?.unwrap_or_default(),
            title_patterns: read("title_patterns.txt", false)?.unwrap_or_else(default_title_patterns),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), AnonymizeError> {
        if self.given_names.is_empty() && self.surnames.is_empty() && self.places.is_empty() {
            return Err(AnonymizeError::EmptyLexicons);
        }
        Ok(())
    }

    /// Writes every list into `dir` using [`LEXICON_FILES`] names.
    pub fn save_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let lists = [
            &self.given_names,
            &self.surnames,
            &self.places,
            &self.frequent_words,
            &self.domain_exceptions,
            &self.title_patterns,
        ];
        for (name, list) in LEXICON_FILES.iter().zip(lists) {
            let mut body = String::new();
            for e in list {
                body.push_str(e);
                body.push('\n');
            }
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    /// Longest entry, in tokens, across the name lexicons.
    pub(crate) fn max_phrase_len(&self) -> usize {
        self.given_names
            .iter()
            .chain(&self.surnames)
            .chain(&self.places)
            .map(|e| e.split(' ').count())
            .max()
            .unwrap_or(1)
    }

    /// Which name lexicon, if any, contains `phrase`.
    pub(crate) fn classify(&self, phrase: &str) -> Option<&'static str> {
        if self.given_names.contains(phrase) {
            Some("given-name")
        } else if self.surnames.contains(phrase) {
            Some("surname")
        } else if self.places.contains(phrase) {
            Some("place")
        } else {
            None
        }
    }

    pub(crate) fn is_exception(&self, word: &str) -> bool {
        self.domain_exceptions.contains(word)
    }

    pub(crate) fn is_filtered(&self, phrase: &str) -> bool {
        self.frequent_words.contains(phrase) || self.domain_exceptions.contains(phrase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_lists_load() {
        let lex = LexiconSet::builtin();
        assert_eq!(lex.domain_exceptions.len(), 43);
        assert!(lex.domain_exceptions.contains("cabello"));
        assert!(lex.domain_exceptions.contains("seco"));
        assert!(lex.domain_exceptions.contains("benigno"));
        assert_eq!(lex.title_patterns, default_title_patterns());
        assert!(lex.places.contains("valle de hebrón"));
        assert_eq!(lex.max_phrase_len(), 3);
    }

    #[test]
    fn entries_are_normalized() {
        let set = parse_lexicon("# c\n  Pérez \n\nSAN   Agustín\n");
        assert_eq!(set.into_iter().collect::<Vec<_>>(), vec!["pérez", "san agustín"]);
    }

    #[test]
    fn dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lex = LexiconSet::builtin();
        lex.save_dir(dir.path()).unwrap();
        assert_eq!(LexiconSet::load_dir(dir.path()).unwrap(), lex);
    }

    #[test]
    fn empty_name_lists_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["given_names.txt", "surnames.txt", "places.txt"] {
            std::fs::write(dir.path().join(f), "# nothing\n").unwrap();
        }
        assert!(matches!(LexiconSet::load_dir(dir.path()), Err(AnonymizeError::EmptyLexicons)));
    }
}
