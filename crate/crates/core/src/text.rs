//! Small helpers for reading model output.

use alloc::string::String;

/// A fenced block (```` ``` ````, optional info string) and the text around it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fenced<'a> {
    pub info: &'a str,
    pub body: &'a str,
    pub before: &'a str,
    pub after: &'a str,
}

/// Finds the first fenced block, optionally requiring an info string.
pub fn find_fenced<'a>(text: &'a str, info: Option<&str>) -> Option<Fenced<'a>> {
    let mut search = 0;
    while let Some(rel) = text[search..].find("```") {
        let open = search + rel;
        let line_end = text[open..].find('\n').map(|i| open + i)?;
        let tag = text[open + 3..line_end].trim();
        let body_start = line_end + 1;
        let close_rel = text[body_start..].find("```")?;
        let close = body_start + close_rel;
        if info.is_none_or(|want| tag.eq_ignore_ascii_case(want)) {
            return Some(Fenced {
                info: tag,
                body: &text[body_start..close],
                before: &text[..open],
                after: &text[close + 3..],
            });
        }
        search = close + 3;
    }
    None
}

/// First sentence of `text`, cut to at most `max` characters.
pub fn first_sentence(text: &str, max: usize) -> String {
    let t = text.trim();
    let mut end = t.len();
    let bytes = t.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        let at_boundary = bytes.get(i + 1).is_none_or(|n| n.is_ascii_whitespace());
        if (b == b'.' || b == b'!' || b == b'?') && at_boundary {
            end = i + 1;
            break;
        }
        if b == b'\n' {
            end = i;
            break;
        }
    }
    let sentence = t[..end].trim();
    if sentence.chars().count() <= max {
        return sentence.into();
    }
    sentence.chars().take(max).collect()
}
