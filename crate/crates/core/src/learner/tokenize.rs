/// Opening glyph of an augmentation marker.
pub const MARKER_OPEN: char = '⟦';
/// Closing glyph of an augmentation marker.
pub const MARKER_CLOSE: char = '⟧';

/// Lowercase letter runs of at least two characters, accents kept, no
/// stemming. A bracketed marker `⟦...⟧` is emitted whole as one token (its
/// content lowercased, whitespace collapsed) so relation values never blend
/// into the report vocabulary.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut word_chars = 0;
    let mut rest = text;

    let flush = |word: &mut String, n: &mut usize, out: &mut Vec<String>| {
        if *n >= 2 {
            out.push(std::mem::take(word));
        } else {
            word.clear();
        }
        *n = 0;
    };

    while let Some(c) = rest.chars().next() {
        if c == MARKER_OPEN {
            if let Some(close) = rest.find(MARKER_CLOSE) {
                flush(&mut word, &mut word_chars, &mut out);
                let inner = &rest[c.len_utf8()..close];
                let body = inner.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ");
                out.push(format!("{MARKER_OPEN}{body}{MARKER_CLOSE}"));
                rest = &rest[close + MARKER_CLOSE.len_utf8()..];
                continue;
            }
        }
        if c.is_alphabetic() {
            word.extend(c.to_lowercase());
            word_chars += 1;
        } else {
            flush(&mut word, &mut word_chars, &mut out);
        }
        rest = &rest[c.len_utf8()..];
    }
    flush(&mut word, &mut word_chars, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letter_runs_min_two() {
        assert_eq!(tokenize("Lesión en la piel, y 3 cm."), vec!["lesión", "en", "la", "piel", "cm"]);
    }

    #[test]
    fn markers_are_atomic() {
        assert_eq!(
            tokenize("lesión en brazo ⟦REL sit=extremidades⟧ ⟦REL t=proceso  neoplasico⟧"),
            vec!["lesión", "en", "brazo", "⟦rel sit=extremidades⟧", "⟦rel t=proceso neoplasico⟧"]
        );
    }

    #[test]
    fn unclosed_marker_is_plain_text() {
        assert_eq!(tokenize("⟦abc de"), vec!["abc", "de"]);
    }
}
