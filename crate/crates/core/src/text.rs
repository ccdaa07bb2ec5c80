//! Deterministic sentence segmentation.
//!
//! A sentence ends at `.`, `!` or `?` followed by whitespace or end of text,
//! unless the token ending there is a known abbreviation.

/// Abbreviations whose trailing period never ends a sentence (lower-cased).
pub const ABBREVIATIONS: &[&str] = &[
    "vs.", "e.g.", "i.e.", "fig.", "figs.", "et al.", "al.", "dr.", "approx.", "ca.", "no.",
    "resp.", "cf.", "etc.", "mr.", "mrs.", "ms.", "st.",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn ends_with_abbreviation(prefix: &str) -> bool {
    let lower = prefix.to_lowercase();
    ABBREVIATIONS.iter().any(|abbr| {
        lower.ends_with(abbr) && {
            let start = lower.len() - abbr.len();
            // the abbreviation must start a word
            lower[..start]
                .chars()
                .next_back()
                .is_none_or(|c| !c.is_alphanumeric())
        }
    })
}

/// Byte offsets (exclusive) at which sentences end.
fn boundaries(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !is_terminal(c) {
            continue;
        }
        // swallow runs like "?!" or "..."
        let mut end = i + c.len_utf8();
        while let Some(&(j, n)) = iter.peek() {
            if is_terminal(n) {
                end = j + n.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        let at_break = match iter.peek() {
            None => true,
            Some(&(_, n)) => n.is_whitespace(),
        };
        if at_break && !(c == '.' && ends_with_abbreviation(&text[..end])) {
            out.push(end);
        }
    }
    out
}

/// Splits text into trimmed, non-empty sentences.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for end in boundaries(text) {
        let s = text[start..end].trim();
        if !s.is_empty() {
            out.push(s);
        }
        start = end;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// The first sentence of `text`, trimmed.
pub fn first_sentence(text: &str) -> &str {
    split_sentences(text).into_iter().next().unwrap_or("")
}

pub fn sentence_count(text: &str) -> usize {
    split_sentences(text).len()
}

pub fn ends_with_terminal(text: &str) -> bool {
    text.trim_end().chars().next_back().is_some_and(is_terminal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_terminal_punctuation() {
        assert_eq!(
            split_sentences("Good question. What is LDL?"),
            vec!["Good question.", "What is LDL?"]
        );
        assert_eq!(
            split_sentences("One! Two? Three."),
            vec!["One!", "Two?", "Three."]
        );
        assert_eq!(split_sentences(""), Vec::<&str>::new());
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(
            split_sentences("Drug A vs. drug B was compared (Fig. 2). Next."),
            vec!["Drug A vs. drug B was compared (Fig. 2).", "Next."]
        );
        assert_eq!(sentence_count("Statins, e.g. atorvastatin, lower LDL."), 1);
        // "obvs." is not an abbreviation even though it ends with "vs."
        assert_eq!(sentence_count("It was obvs. Then."), 2);
    }

    #[test]
    fn decimals_stay_inside_sentence() {
        assert_eq!(sentence_count("HR was 0.75 in the treated arm."), 1);
    }

    #[test]
    fn first_sentence_truncates() {
        assert_eq!(
            first_sentence("Aspirin inhibits COX-1. This is extra."),
            "Aspirin inhibits COX-1."
        );
        assert_eq!(first_sentence("no punctuation"), "no punctuation");
    }
}
