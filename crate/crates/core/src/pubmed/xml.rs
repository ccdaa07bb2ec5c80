//! Parsers for esearch result sets and efetch article sets.

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PaperRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("malformed XML at byte {position}: {message}")]
    Syntax { position: u64, message: String },
    #[error("service returned an error: {0}")]
    ServicePayload(String),
    #[error("esearch result lacks `{0}`")]
    MissingElement(&'static str),
}

/// Why an article element did not yield a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    NoAbstract,
    MissingPmid,
    MissingJournal,
    MissingYear,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedArticles {
    pub records: Vec<PaperRecord>,
    pub skipped: Vec<(String, SkipReason)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub total_count: usize,
    pub ids: Vec<String>,
}

fn syntax(reader: &Reader<&[u8]>, message: impl Into<String>) -> XmlError {
    XmlError::Syntax {
        position: reader.buffer_position(),
        message: message.into(),
    }
}

/// Walks events keeping an element stack; reports unbalanced documents.
struct Walker<'a> {
    reader: Reader<&'a [u8]>,
    stack: Vec<String>,
}

enum Step {
    Open,
    Close(String),
    Text(String),
    Done,
}

impl<'a> Walker<'a> {
    fn new(payload: &'a [u8]) -> Self {
        let mut reader = Reader::from_reader(payload);
        reader.config_mut().trim_text(false);
        Walker {
            reader,
            stack: Vec::new(),
        }
    }

    fn path_ends_with(&self, suffix: &[&str]) -> bool {
        self.stack.len() >= suffix.len()
            && self.stack[self.stack.len() - suffix.len()..]
                .iter()
                .zip(suffix)
                .all(|(a, b)| a == b)
    }

    fn inside(&self, name: &str) -> bool {
        self.stack.iter().any(|s| s == name)
    }

    fn next(&mut self, attrs: &mut Vec<(String, String)>) -> Result<Step, XmlError> {
        loop {
            let event = self
                .reader
                .read_event()
                .map_err(|e| syntax(&self.reader, e.to_string()))?;
            match event {
                Event::Start(e) => {
                    attrs.clear();
                    for a in e.attributes().flatten() {
                        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
                        let value = a
                            .unescape_value()
                            .map_err(|err| syntax(&self.reader, err.to_string()))?
                            .into_owned();
                        attrs.push((key, value));
                    }
                    self.stack
                        .push(String::from_utf8_lossy(e.name().as_ref()).into_owned());
                    return Ok(Step::Open);
                }
                Event::Empty(_) => continue,
                Event::End(e) => {
                    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                    match self.stack.pop() {
                        Some(open) if open == name => return Ok(Step::Close(name)),
                        _ => return Err(syntax(&self.reader, format!("unexpected </{name}>"))),
                    }
                }
                Event::Text(t) => {
                    let text = t
                        .unescape()
                        .map_err(|e| syntax(&self.reader, e.to_string()))?;
                    return Ok(Step::Text(text.into_owned()));
                }
                Event::CData(c) => {
                    return Ok(Step::Text(
                        String::from_utf8_lossy(&c.into_inner()).into_owned(),
                    ));
                }
                Event::Eof => {
                    if let Some(open) = self.stack.last() {
                        return Err(syntax(
                            &self.reader,
                            format!("document ends inside <{open}>"),
                        ));
                    }
                    return Ok(Step::Done);
                }
                _ => continue,
            }
        }
    }
}

#[derive(Default)]
struct ArticleBuilder {
    pmid: String,
    journal: String,
    title: String,
    pub_year: Option<i32>,
    fallback_year: Option<i32>,
    sections: Vec<String>,
    current_section: Option<String>,
}

impl ArticleBuilder {
    fn finish(self) -> Result<PaperRecord, (String, SkipReason)> {
        let pmid = self.pmid.trim().to_string();
        if pmid.is_empty() {
            return Err((pmid, SkipReason::MissingPmid));
        }
        let abstract_text = self
            .sections
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        if abstract_text.is_empty() {
            return Err((pmid, SkipReason::NoAbstract));
        }
        let journal = self.journal.trim().to_string();
        if journal.is_empty() {
            return Err((pmid, SkipReason::MissingJournal));
        }
        let Some(pub_year) = self.pub_year.or(self.fallback_year) else {
            return Err((pmid, SkipReason::MissingYear));
        };
        Ok(PaperRecord {
            pmid,
            journal,
            title: self.title.trim().to_string(),
            abstract_text,
            pub_year,
            specialty: None,
        })
    }
}

fn leading_year(text: &str) -> Option<i32> {
    let t = text.trim();
    let digits: String = t.chars().take(4).collect();
    if digits.len() == 4 && digits.chars().all(|c| c.is_ascii_digit()) {
        digits.parse().ok()
    } else {
        None
    }
}

/// Parses an efetch `PubmedArticleSet` document.
///
/// Structured abstracts are joined in document order with single spaces and
/// their section labels dropped.
pub fn parse_pubmed_xml(payload: &[u8]) -> Result<ParsedArticles, XmlError> {
    let mut walker = Walker::new(payload);
    let mut out = ParsedArticles::default();
    let mut article: Option<ArticleBuilder> = None;
    let mut attrs = Vec::new();

    loop {
        match walker.next(&mut attrs)? {
            Step::Done => break,
            Step::Open => {
                if walker.path_ends_with(&["PubmedArticle"]) {
                    article = Some(ArticleBuilder::default());
                } else if walker.path_ends_with(&["Abstract", "AbstractText"]) {
                    if let Some(a) = article.as_mut() {
                        a.current_section = Some(String::new());
                    }
                }
            }
            Step::Close(name) => match name.as_str() {
                "PubmedArticle" => {
                    if let Some(a) = article.take() {
                        match a.finish() {
                            Ok(rec) => out.records.push(rec),
                            Err(skip) => out.skipped.push(skip),
                        }
                    }
                }
                "AbstractText" => {
                    if let Some(a) = article.as_mut() {
                        if let Some(section) = a.current_section.take() {
                            a.sections.push(section);
                        }
                    }
                }
                _ => {}
            },
            Step::Text(text) => {
                let Some(a) = article.as_mut() else { continue };
                if let Some(section) = a.current_section.as_mut() {
                    section.push_str(&text);
                } else if walker.path_ends_with(&["MedlineCitation", "PMID"]) {
                    a.pmid.push_str(&text);
                } else if walker.path_ends_with(&["Article", "Journal", "Title"]) {
                    a.journal.push_str(&text);
                } else if walker.inside("ArticleTitle") {
                    a.title.push_str(&text);
                } else if walker.path_ends_with(&["PubDate", "Year"])
                    || walker.path_ends_with(&["PubDate", "MedlineDate"])
                {
                    if a.pub_year.is_none() {
                        a.pub_year = leading_year(&text);
                    }
                } else if walker.path_ends_with(&["ArticleDate", "Year"])
                    && a.fallback_year.is_none()
                {
                    a.fallback_year = leading_year(&text);
                }
            }
        }
    }
    Ok(out)
}

/// Parses an esearch `eSearchResult` document.
pub fn parse_esearch(payload: &[u8]) -> Result<SearchResult, XmlError> {
    let mut walker = Walker::new(payload);
    let mut attrs = Vec::new();
    let mut count: Option<String> = None;
    let mut ids = Vec::new();
    let mut current_id: Option<String> = None;
    let mut error: Option<String> = None;

    loop {
        match walker.next(&mut attrs)? {
            Step::Done => break,
            Step::Open => {
                if walker.path_ends_with(&["IdList", "Id"]) {
                    current_id = Some(String::new());
                } else if walker.path_ends_with(&["eSearchResult", "ERROR"]) {
                    error.get_or_insert_with(String::new);
                }
            }
            Step::Close(name) => {
                if name == "Id" {
                    if let Some(id) = current_id.take() {
                        ids.push(id.trim().to_string());
                    }
                }
            }
            Step::Text(text) => {
                if let Some(id) = current_id.as_mut() {
                    id.push_str(&text);
                } else if walker.path_ends_with(&["eSearchResult", "Count"]) {
                    count.get_or_insert_with(String::new).push_str(&text);
                } else if walker.path_ends_with(&["eSearchResult", "ERROR"]) {
                    error.get_or_insert_with(String::new).push_str(&text);
                }
            }
        }
    }
    if let Some(message) = error {
        return Err(XmlError::ServicePayload(message.trim().to_string()));
    }
    let total_count = count
        .and_then(|c| c.trim().parse().ok())
        .ok_or(XmlError::MissingElement("Count"))?;
    Ok(SearchResult { total_count, ids })
}
