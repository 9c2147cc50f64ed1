use crate::error::{Error, Result};
use crate::rating::RatingLabel;

fn clean_token(tok: &str) -> &str {
    tok.trim().trim_matches(|c: char| {
        c.is_whitespace() || matches!(c, '"' | '\'' | '*' | '`' | '.' | ':' | ';')
    })
}

fn match_token(tok: &str, class_names: &[String]) -> Option<usize> {
    let tok = clean_token(tok);
    if let Some(i) = class_names.iter().position(|n| n.eq_ignore_ascii_case(tok)) {
        return Some(i);
    }
    tok.parse::<usize>().ok().filter(|&i| i < class_names.len())
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Rightmost whole-word, case-insensitive occurrence of any class name.
fn last_keyword(raw: &str, class_names: &[String]) -> Option<usize> {
    let hay = raw.to_lowercase();
    let mut best: Option<(usize, usize, usize)> = None; // (start, len, class)
    for (class, name) in class_names.iter().enumerate() {
        let needle = name.to_lowercase();
        if needle.is_empty() {
            continue;
        }
        for (start, _) in hay.match_indices(&needle) {
            let end = start + needle.len();
            let before_ok = hay[..start]
                .chars()
                .next_back()
                .is_none_or(|c| !is_word_char(c));
            let after_ok = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
            if !(before_ok && after_ok) {
                continue;
            }
            let better = match best {
                None => true,
                Some((s, l, _)) => end > s + l || (end == s + l && needle.len() > l),
            };
            if better {
                best = Some((start, needle.len(), class));
            }
        }
    }
    best.map(|(_, _, c)| c)
}

/// Extracts `expected_count` ratings from a model reply.
///
/// The last bracketed list in the text is authoritative; its comma-separated
/// tokens are matched case-insensitively against `class_names`, falling back to
/// integer class indices. With no brackets and a single expected rating, the
/// last class name mentioned as a whole word is used. Anything else is a parse
/// failure; a partial list is never returned.
pub fn parse_rating_response(
    raw: &str,
    class_names: &[String],
    expected_count: usize,
) -> Result<Vec<RatingLabel>> {
    if expected_count == 0 {
        return Err(Error::Parse("expected count must be at least 1".into()));
    }
    let list = raw
        .rfind(']')
        .and_then(|close| raw[..close].rfind('[').map(|open| &raw[open + 1..close]));
    match list {
        Some(body) => {
            let labels = body
                .split(',')
                .filter(|t| !clean_token(t).is_empty())
                .map(|t| {
                    match_token(t, class_names)
                        .map(RatingLabel::new_unchecked)
                        .ok_or_else(|| Error::Parse(format!("unknown rating {:?}", clean_token(t))))
                })
                .collect::<Result<Vec<_>>>()?;
            if labels.len() != expected_count {
                return Err(Error::Parse(format!(
                    "expected {expected_count} ratings, found {}",
                    labels.len()
                )));
            }
            Ok(labels)
        }
        None if expected_count == 1 => last_keyword(raw, class_names)
            .map(|c| vec![RatingLabel::new_unchecked(c)])
            .ok_or_else(|| Error::Parse("no rating found".into())),
        None => Err(Error::Parse("no bracketed list of ratings".into())),
    }
}
