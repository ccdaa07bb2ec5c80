//! Parsing completion text into findings and questions.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Finding;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no numbered findings in completion")]
pub struct NoFindings;

fn numbered_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+[.)]\s+(.*)$").expect("static pattern"))
}

/// Extracts numbered lines (`1. ...`, `2) ...`) as findings.
///
/// Each finding keeps only its first sentence; a missing terminal mark
/// becomes a period. Indices are assigned 1, 2, ... in line order.
pub fn parse_findings(
    completion_text: &str,
    source_pmid: &str,
) -> Result<Vec<Finding>, NoFindings> {
    let mut findings = Vec::new();
    for line in completion_text.lines() {
        let Some(caps) = numbered_line().captures(line) else {
            continue;
        };
        let sentence = text::first_sentence(&caps[1]);
        if sentence.is_empty() {
            continue;
        }
        let mut text = sentence.to_string();
        if !text::ends_with_terminal(&text) {
            text.push('.');
        }
        findings.push(Finding {
            text,
            source_pmid: source_pmid.to_string(),
            index: findings.len() + 1,
        });
    }
    if findings.is_empty() {
        Err(NoFindings)
    } else {
        Ok(findings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionReject {
    Empty,
    MultiSentence,
    NotAQuestion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuestionOutcome {
    Question(String),
    NotBiomedical,
    Reject(QuestionReject),
}

fn strip_quotes(s: &str) -> &str {
    for q in ['"', '\''] {
        if let Some(inner) = s.strip_prefix(q).and_then(|r| r.strip_suffix(q)) {
            return inner.trim();
        }
    }
    s
}

pub fn parse_question(completion_text: &str) -> QuestionOutcome {
    let trimmed = strip_quotes(completion_text.trim());
    if trimmed.eq_ignore_ascii_case("none") {
        return QuestionOutcome::NotBiomedical;
    }
    if trimmed.is_empty() {
        return QuestionOutcome::Reject(QuestionReject::Empty);
    }
    if text::sentence_count(trimmed) != 1 {
        return QuestionOutcome::Reject(QuestionReject::MultiSentence);
    }
    if !trimmed.ends_with('?') {
        return QuestionOutcome::Reject(QuestionReject::NotAQuestion);
    }
    QuestionOutcome::Question(trimmed.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(f: &[Finding]) -> Vec<&str> {
        f.iter().map(|f| f.text.as_str()).collect()
    }

    #[test]
    fn numbered_lines_become_findings() {
        let f = parse_findings("1. Aspirin inhibits COX-1.\n2. Statins lower LDL.", "9").unwrap();
        assert_eq!(texts(&f), ["Aspirin inhibits COX-1.", "Statins lower LDL."]);
        assert_eq!(f[1].index, 2);
        assert_eq!(f[1].source_pmid, "9");
    }

    #[test]
    fn preamble_ignored() {
        let f = parse_findings("Here are the findings:\n1. X occurs.", "1").unwrap();
        assert_eq!(texts(&f), ["X occurs."]);
    }

    #[test]
    fn no_numbered_lines() {
        assert_eq!(parse_findings("No findings.", "1"), Err(NoFindings));
        assert_eq!(parse_findings("", "1"), Err(NoFindings));
        // a bare number with no text after it is not a finding
        assert_eq!(parse_findings("1.\n2) ", "1"), Err(NoFindings));
    }

    #[test]
    fn finding_trimmed_to_one_sentence() {
        let f = parse_findings(
            "  3) Metformin lowers HbA1c. It also aids weight loss.\n4. Missing stop",
            "1",
        )
        .unwrap();
        assert_eq!(texts(&f), ["Metformin lowers HbA1c.", "Missing stop."]);
        assert_eq!(f[0].index, 1);
        // decimal numbers inside a finding are not list markers
        let f = parse_findings("1. HR was 0.75 vs. placebo.", "1").unwrap();
        assert_eq!(texts(&f), ["HR was 0.75 vs. placebo."]);
    }

    #[test]
    fn question_outcomes() {
        assert_eq!(parse_question("None"), QuestionOutcome::NotBiomedical);
        assert_eq!(parse_question("  none \n"), QuestionOutcome::NotBiomedical);
        assert_eq!(parse_question("'None'"), QuestionOutcome::NotBiomedical);
        assert_eq!(
            parse_question("What enzyme does aspirin inhibit?"),
            QuestionOutcome::Question("What enzyme does aspirin inhibit?".into())
        );
        assert_eq!(
            parse_question("Good question. What is LDL?"),
            QuestionOutcome::Reject(QuestionReject::MultiSentence)
        );
        assert_eq!(
            parse_question("LDL is bad."),
            QuestionOutcome::Reject(QuestionReject::NotAQuestion)
        );
        assert_eq!(
            parse_question("   "),
            QuestionOutcome::Reject(QuestionReject::Empty)
        );
    }
}
