/// Maximal runs of Unicode letters as `(start, end, slice)` byte spans.
pub(crate) fn letter_runs(text: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let mut iter = text.char_indices().peekable();
    std::iter::from_fn(move || {
        while let Some(&(_, c)) = iter.peek() {
            if c.is_alphabetic() {
                break;
            }
            iter.next();
        }
        let (start, _) = *iter.peek()?;
        let mut end = start;
        while let Some(&(i, c)) = iter.peek() {
            if !c.is_alphabetic() {
                break;
            }
            end = i + c.len_utf8();
            iter.next();
        }
        Some((start, end, &text[start..end]))
    })
}
