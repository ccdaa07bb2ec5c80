//! Keyword filter that drops study-specific findings.

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Finding;

pub const DEFAULT_KEYWORDS: [&str; 6] = [
    "study",
    "paper",
    "result",
    "abstract",
    "author",
    "department",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Case-insensitive match on word boundaries: "Authors" does not hit "author".
    #[default]
    WholeWord,
    /// Case-insensitive substring match.
    Substring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub kept: bool,
    /// Matched keyword; present iff `kept` is false.
    pub reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct KeywordFilter {
    keywords: Vec<String>,
    mode: MatchMode,
    pattern: Option<Regex>,
}

impl Default for KeywordFilter {
    fn default() -> Self {
        Self::new(
            DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            MatchMode::WholeWord,
        )
    }
}

impl KeywordFilter {
    pub fn new(keywords: Vec<String>, mode: MatchMode) -> Self {
        let keywords: Vec<String> = keywords
            .into_iter()
            .map(|k| k.trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        let pattern = (!keywords.is_empty()).then(|| {
            let alternatives: Vec<String> = keywords.iter().map(|k| regex::escape(k)).collect();
            let body = alternatives.join("|");
            let src = match mode {
                MatchMode::WholeWord => format!(r"(?i)\b(?:{body})\b"),
                MatchMode::Substring => format!(r"(?i)(?:{body})"),
            };
            Regex::new(&src).expect("escaped keywords form a valid pattern")
        });
        KeywordFilter {
            keywords,
            mode,
            pattern,
        }
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    /// Leftmost keyword occurrence in `text`, lower-cased.
    pub fn first_match(&self, text: &str) -> Option<String> {
        self.pattern
            .as_ref()
            .and_then(|re| re.find(text))
            .map(|m| m.as_str().to_lowercase())
    }

    pub fn check(&self, finding: &Finding) -> FilterVerdict {
        match self.first_match(&finding.text) {
            Some(kw) => FilterVerdict {
                kept: false,
                reason: Some(kw),
            },
            None => FilterVerdict {
                kept: true,
                reason: None,
            },
        }
    }
}

pub fn filter_finding(finding: &Finding, filter: &KeywordFilter) -> FilterVerdict {
    filter.check(finding)
}
