use serde::{Deserialize, Serialize};

use super::{tokens::letter_runs, LexiconSet};

/// Replacement written over every masked entity.
pub const MASK_TOKEN: &str = "[Entidad]";

/// A rewrite applied to the input, as a byte span of the ORIGINAL text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedRule {
    pub start: usize,
    pub end: usize,
    pub rule: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationResult {
    pub masked_text: String,
    /// Number of mask tokens introduced.
    pub mask_count: usize,
    /// Number of digit runs deleted.
    pub digit_stripped_count: usize,
    pub applied_rules: Vec<AppliedRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Word,
    Mask,
}

#[derive(Debug)]
struct Token {
    kind: TokenKind,
    start: usize,
    end: usize,
    lower: String,
}

/// Letter runs plus literal mask tokens, which are kept atomic so that a
/// second pass never re-masks them.
fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut cursor = 0;
    while let Some(pos) = text[cursor..].find(MASK_TOKEN) {
        let abs = cursor + pos;
        push_words(text, cursor, abs, &mut tokens);
        tokens.push(Token { kind: TokenKind::Mask, start: abs, end: abs + MASK_TOKEN.len(), lower: String::new() });
        cursor = abs + MASK_TOKEN.len();
    }
    push_words(text, cursor, text.len(), &mut tokens);
    tokens
}

fn push_words(text: &str, from: usize, to: usize, out: &mut Vec<Token>) {
    for (s, e, w) in letter_runs(&text[from..to]) {
        out.push(Token { kind: TokenKind::Word, start: from + s, end: from + e, lower: w.to_lowercase() });
    }
}

/// De-identifies one report. Steps, in order:
///
/// 1. delete every run of numeric characters (surrounding punctuation stays);
/// 2. match whole tokens, or whitespace-separated token sequences, against
///    the given-name, surname and place lexicons, case-insensitively;
/// 3. discard matches found in the frequent-word or domain-exception lists;
/// 4. replace each surviving match with [`MASK_TOKEN`];
/// 5. mask the single word following a title trigger (`dr`, `dra`, ...),
///    unless that word is a domain exception.
pub fn anonymize_document(text: &str, lexicons: &LexiconSet) -> AnonymizationResult {
    let mut result = AnonymizationResult::default();
    if text.is_empty() {
        return result;
    }

    // step 1; `origin[i]` is the original byte offset of stripped byte `i`
    let mut stripped = String::with_capacity(text.len());
    let mut origin = Vec::with_capacity(text.len() + 1);
    let mut run_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_numeric() {
            run_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = run_start.take() {
            result.applied_rules.push(AppliedRule { start: s, end: i, rule: "digits".into() });
            result.digit_stripped_count += 1;
        }
        for _ in 0..c.len_utf8() {
            origin.push(i);
        }
        stripped.push(c);
    }
    if let Some(s) = run_start {
        result.applied_rules.push(AppliedRule { start: s, end: text.len(), rule: "digits".into() });
        result.digit_stripped_count += 1;
    }
    origin.push(text.len());

    let tokens = tokenize(&stripped);
    // (first token, last token, rule)
    let mut masks: Vec<(usize, usize, &'static str)> = Vec::new();
    let max_len = lexicons.max_phrase_len();

    // steps 2-4
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].kind != TokenKind::Word {
            i += 1;
            continue;
        }
        let mut matched = None;
        for n in (1..=max_len.min(tokens.len() - i)).rev() {
            let span = &tokens[i..i + n];
            if !contiguous_words(&stripped, span) {
                continue;
            }
            let phrase = span.iter().map(|t| t.lower.as_str()).collect::<Vec<_>>().join(" ");
            let Some(rule) = lexicons.classify(&phrase) else { continue };
            if lexicons.is_filtered(&phrase) || span.iter().any(|t| lexicons.is_exception(&t.lower)) {
                continue;
            }
            matched = Some((n, rule));
            break;
        }
        match matched {
            Some((n, rule)) => {
                masks.push((i, i + n - 1, rule));
                i += n;
            }
            None => i += 1,
        }
    }

    // step 5
    let masked_token = |idx: usize, masks: &[(usize, usize, &str)]| masks.iter().any(|&(a, b, _)| a <= idx && idx <= b);
    for idx in 0..tokens.len().saturating_sub(1) {
        let (trigger, next) = (&tokens[idx], &tokens[idx + 1]);
        if trigger.kind != TokenKind::Word
            || !lexicons.title_patterns.contains(&trigger.lower)
            || masked_token(idx, &masks)
            || next.kind != TokenKind::Word
            || masked_token(idx + 1, &masks)
            || lexicons.is_exception(&next.lower)
        {
            continue;
        }
        masks.push((idx + 1, idx + 1, "title"));
    }
    masks.sort_by_key(|m| m.0);

    let mut out = String::with_capacity(stripped.len());
    let mut cursor = 0;
    for &(first, last, rule) in &masks {
        let (s, e) = (tokens[first].start, tokens[last].end);
        out.push_str(&stripped[cursor..s]);
        out.push_str(MASK_TOKEN);
        cursor = e;
        result.applied_rules.push(AppliedRule {
            start: origin[s],
            end: origin[e - 1] + 1 + trailing_len(text, origin[e - 1]),
            rule: rule.to_string(),
        });
    }
    out.push_str(&stripped[cursor..]);
    result.mask_count = masks.len();
    result.masked_text = out;
    result.applied_rules.sort_by_key(|r| (r.start, r.end));
    result
}

/// Remaining bytes of the UTF-8 character starting at `at`, after its first.
fn trailing_len(text: &str, at: usize) -> usize {
    text[at..].chars().next().map_or(0, |c| c.len_utf8() - 1)
}

/// Tokens are all words separated only by whitespace.
fn contiguous_words(text: &str, span: &[Token]) -> bool {
    span.iter().all(|t| t.kind == TokenKind::Word)
        && span.windows(2).all(|w| {
            let gap = &text[w[0].end..w[1].start];
            !gap.is_empty() && gap.chars().all(char::is_whitespace)
        })
}
