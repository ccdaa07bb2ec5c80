//! Core record types and line-delimited persistence.
//!
//! Every stage of the pipeline exchanges data through the types in this
//! module. Corpus files hold one JSON object per line with the fixed field
//! names `pmid, journal, title, abstract, pub_year, specialty`.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default lower bound on publication year for admitted records.
pub const DEFAULT_MIN_YEAR: i32 = 2010;

/// One of the eleven internal-medicine sub-specialties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubSpecialty {
    /// Allergy
    ALL,
    /// Cardiac and cardiovascular systems
    CAR,
    /// Endocrinology and metabolism
    MET,
    /// Gastroenterology
    GAS,
    /// Hematology
    HEM,
    /// Infectious diseases
    INF,
    /// Oncology
    ONC,
    /// Respiratory system
    RES,
    /// Rheumatology
    RHE,
    /// Urology and nephrology
    URO,
    /// General internal medicine
    MED,
}

impl SubSpecialty {
    pub const COUNT: usize = 11;

    pub const ALL_CODES: [SubSpecialty; 11] = [
        SubSpecialty::ALL,
        SubSpecialty::CAR,
        SubSpecialty::MET,
        SubSpecialty::GAS,
        SubSpecialty::HEM,
        SubSpecialty::INF,
        SubSpecialty::ONC,
        SubSpecialty::RES,
        SubSpecialty::RHE,
        SubSpecialty::URO,
        SubSpecialty::MED,
    ];

    pub fn code(self) -> &'static str {
        match self {
            SubSpecialty::ALL => "ALL",
            SubSpecialty::CAR => "CAR",
            SubSpecialty::MET => "MET",
            SubSpecialty::GAS => "GAS",
            SubSpecialty::HEM => "HEM",
            SubSpecialty::INF => "INF",
            SubSpecialty::ONC => "ONC",
            SubSpecialty::RES => "RES",
            SubSpecialty::RHE => "RHE",
            SubSpecialty::URO => "URO",
            SubSpecialty::MED => "MED",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SubSpecialty::ALL => "Allergy",
            SubSpecialty::CAR => "Cardiac Cardiovascular Systems",
            SubSpecialty::MET => "Endocrinology Metabolism",
            SubSpecialty::GAS => "Gastroenterology",
            SubSpecialty::HEM => "Hematology",
            SubSpecialty::INF => "Infectious Diseases",
            SubSpecialty::ONC => "Oncology",
            SubSpecialty::RES => "Respiratory System",
            SubSpecialty::RHE => "Rheumatology",
            SubSpecialty::URO => "Urology Nephrology",
            SubSpecialty::MED => "General Internal Medicine",
        }
    }

    /// Position in [`SubSpecialty::ALL_CODES`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SubSpecialty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown sub-specialty code `{0}`")]
pub struct UnknownSpecialty(pub String);

impl FromStr for SubSpecialty {
    type Err = UnknownSpecialty;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubSpecialty::ALL_CODES
            .iter()
            .copied()
            .find(|c| c.code() == s.trim())
            .ok_or_else(|| UnknownSpecialty(s.to_string()))
    }
}

/// One PubMed article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub pmid: String,
    pub journal: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub pub_year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specialty: Option<SubSpecialty>,
}

/// Why a record was not admitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum RejectReason {
    #[error("empty abstract")]
    EmptyAbstract,
    #[error("empty journal")]
    EmptyJournal,
    #[error("empty pmid")]
    EmptyId,
    #[error("published in {0}, before the minimum year")]
    TooOld(i32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Admission check applied before a record enters any corpus.
pub fn validate_record(record: &PaperRecord, min_year: i32) -> Verdict {
    if record.pmid.trim().is_empty() {
        return Verdict::Reject(RejectReason::EmptyId);
    }
    if record.journal.trim().is_empty() {
        return Verdict::Reject(RejectReason::EmptyJournal);
    }
    if record.abstract_text.trim().is_empty() {
        return Verdict::Reject(RejectReason::EmptyAbstract);
    }
    if record.pub_year < min_year {
        return Verdict::Reject(RejectReason::TooOld(record.pub_year));
    }
    Verdict::Accept
}

/// A single-sentence finding distilled from an abstract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub text: String,
    pub source_pmid: String,
    /// 1-based position within the source abstract's finding list.
    pub index: usize,
}

/// One row of the supervised fine-tuning dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
    pub specialty: SubSpecialty,
    pub source_pmid: String,
}

/// One row of the dataset statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    /// `None` marks the totals row.
    pub specialty: Option<SubSpecialty>,
    pub journals: u64,
    pub papers: u64,
    pub papers_per_journal: f64,
    pub tokens: u64,
    pub qa_pairs: u64,
    pub pt_steps: Option<u64>,
    pub sft_steps: Option<u64>,
}

/// Average papers per journal, truncated (not rounded) to two decimals.
///
/// Zero journals yields 0.0. Integer arithmetic keeps the cut exact.
pub fn papers_per_journal(papers: u64, journals: u64) -> f64 {
    if journals == 0 {
        return 0.0;
    }
    let hundredths = (u128::from(papers) * 100) / u128::from(journals);
    hundredths as f64 / 100.0
}

impl StatsRow {
    pub fn new(specialty: Option<SubSpecialty>, journals: u64, papers: u64) -> Self {
        StatsRow {
            specialty,
            journals,
            papers,
            papers_per_journal: papers_per_journal(papers, journals),
            tokens: 0,
            qa_pairs: 0,
            pt_steps: None,
            sft_steps: None,
        }
    }

    pub fn label(&self) -> &'static str {
        self.specialty.map_or("Total", SubSpecialty::code)
    }
}

pub const STATS_CSV_HEADER: &str =
    "specialty,journals,papers,papers_per_journal,tokens,qa_pairs,pt_steps,sft_steps";

/// Writes rows as the stats CSV, header first.
pub fn write_stats_csv<W: Write>(rows: &[StatsRow], out: W) -> io::Result<()> {
    let mut out = out;
    writeln!(out, "{STATS_CSV_HEADER}")?;
    for row in rows {
        let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:.2},{},{},{},{}",
            row.label(),
            row.journals,
            row.papers,
            row.papers_per_journal,
            row.tokens,
            row.qa_pairs,
            opt(row.pt_steps),
            opt(row.sft_steps),
        )?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: invalid record ({field})")]
    Schema { line: usize, field: String },
}

/// Writes one JSON object per line. Returns the number of lines written.
pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], out: W) -> Result<usize, CorpusError> {
    let mut out = BufWriter::new(out);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(items.len())
}

/// Outcome of a lenient read: every parseable line plus the failures.
#[derive(Debug)]
pub struct LenientRead<T> {
    pub items: Vec<T>,
    pub errors: Vec<CorpusError>,
}

fn parse_lines<T, R, F>(source: R, mut on_error: F) -> Result<Vec<T>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
    F: FnMut(CorpusError) -> Result<(), CorpusError>,
{
    let mut items = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(item) => items.push(item),
            Err(e) => on_error(CorpusError::Schema {
                line: i + 1,
                field: schema_field(&e),
            })?,
        }
    }
    Ok(items)
}

fn schema_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    // serde reports "missing field `x`" / "unknown variant ..." with backticked names
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    msg
}

/// Strict read: the first malformed line aborts with its line number.
pub fn read_jsonl<T, R>(source: R) -> Result<Vec<T>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    parse_lines(source, Err)
}

/// Lenient read: malformed lines are collected and skipped.
pub fn read_jsonl_lenient<T, R>(source: R) -> Result<LenientRead<T>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut errors = Vec::new();
    let items = parse_lines(source, |e| {
        errors.push(e);
        Ok(())
    })?;
    Ok(LenientRead { items, errors })
}

pub fn write_corpus(records: &[PaperRecord], path: &Path) -> Result<usize, CorpusError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_jsonl(records, File::create(path)?)
}

pub fn read_corpus(path: &Path) -> Result<Vec<PaperRecord>, CorpusError> {
    read_jsonl(File::open(path)?)
}

pub fn read_corpus_lenient(path: &Path) -> Result<LenientRead<PaperRecord>, CorpusError> {
    read_jsonl_lenient(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(pmid: &str, year: i32) -> PaperRecord {
        PaperRecord {
            pmid: pmid.into(),
            journal: "Circulation".into(),
            title: "A title".into(),
            abstract_text: "Aspirin inhibits COX-1.".into(),
            pub_year: year,
            specialty: None,
        }
    }

    #[test]
    fn specialty_codes_roundtrip() {
        for code in SubSpecialty::ALL_CODES {
            assert_eq!(code.code().parse::<SubSpecialty>().unwrap(), code);
        }
        assert_eq!(SubSpecialty::ALL_CODES.len(), 11);
        assert!("XYZ".parse::<SubSpecialty>().is_err());
        assert!("car".parse::<SubSpecialty>().is_err());
    }

    #[test]
    fn validate_rejects_old_record() {
        assert_eq!(
            validate_record(&record("1", 2009), 2010),
            Verdict::Reject(RejectReason::TooOld(2009))
        );
        assert_eq!(validate_record(&record("1", 2015), 2010), Verdict::Accept);
        assert_eq!(validate_record(&record("1", 2010), 2010), Verdict::Accept);
    }

    #[test]
    fn validate_rejects_empty_fields() {
        let mut r = record("1", 2015);
        r.abstract_text = "  \n".into();
        assert_eq!(
            validate_record(&r, 2010),
            Verdict::Reject(RejectReason::EmptyAbstract)
        );
        let mut r = record("1", 2015);
        r.journal.clear();
        assert_eq!(
            validate_record(&r, 2010),
            Verdict::Reject(RejectReason::EmptyJournal)
        );
        let r = record("", 2015);
        assert_eq!(
            validate_record(&r, 2010),
            Verdict::Reject(RejectReason::EmptyId)
        );
    }

    #[test]
    fn corpus_roundtrip_in_memory() {
        let recs = vec![record("1", 2011), record("2", 2012), record("3", 2013)];
        let mut buf = Vec::new();
        assert_eq!(write_jsonl(&recs, &mut buf).unwrap(), 3);
        let back: Vec<PaperRecord> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, recs);
        let line = String::from_utf8(buf).unwrap();
        assert!(line
            .starts_with(r#"{"pmid":"1","journal":"Circulation","title":"A title","abstract":"#));
    }

    #[test]
    fn empty_corpus() {
        let mut buf = Vec::new();
        assert_eq!(write_jsonl::<PaperRecord, _>(&[], &mut buf).unwrap(), 0);
        assert!(buf.is_empty());
        let back: Vec<PaperRecord> = read_jsonl(&buf[..]).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn corrupted_line_reported_with_number() {
        let recs: Vec<_> = (1..=5).map(|i| record(&i.to_string(), 2015)).collect();
        let mut buf = Vec::new();
        write_jsonl(&recs, &mut buf).unwrap();
        let mut lines: Vec<String> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        lines[2] = r#"{"pmid":"3","journal":"Circulation","title":"t"}"#.into();
        let text = lines.join("\n");

        match read_jsonl::<PaperRecord, _>(text.as_bytes()) {
            Err(CorpusError::Schema { line, field }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "abstract");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
        let lenient = read_jsonl_lenient::<PaperRecord, _>(text.as_bytes()).unwrap();
        assert_eq!(lenient.items.len(), 4);
        assert_eq!(lenient.errors.len(), 1);
    }

    #[test]
    fn unicode_preserved() {
        let mut r = record("9", 2020);
        r.abstract_text = "β-blockers reduce mortality ≈ Größe µg/kg.".into();
        let mut buf = Vec::new();
        write_jsonl(std::slice::from_ref(&r), &mut buf).unwrap();
        let back: Vec<PaperRecord> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back[0], r);
    }

    #[test]
    fn ppj_truncates_to_hundredths() {
        assert_eq!(papers_per_journal(5049, 39), 129.46);
        assert_eq!(papers_per_journal(57810, 144), 401.45);
        assert_eq!(papers_per_journal(397602, 1669), 238.22);
        assert_eq!(papers_per_journal(10, 0), 0.0);
    }

    #[test]
    fn stats_csv_layout() {
        let mut row = StatsRow::new(Some(SubSpecialty::RHE), 56, 11553);
        row.pt_steps = Some(25000);
        let total = StatsRow::new(None, 56, 11553);
        let mut buf = Vec::new();
        write_stats_csv(&[row, total], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], STATS_CSV_HEADER);
        assert_eq!(lines[1], "RHE,56,11553,206.30,0,0,25000,");
        assert_eq!(lines[2], "Total,56,11553,206.30,0,0,,");
    }
}
