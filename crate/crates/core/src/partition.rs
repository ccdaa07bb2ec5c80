//! Journal catalog, paper routing and dataset statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{CorpusError, PaperRecord, QaPair, StatsRow, SubSpecialty};

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("journal `{name}` listed under both {first} and {second}")]
    DuplicateJournal {
        name: String,
        first: SubSpecialty,
        second: SubSpecialty,
    },
    #[error("catalog row {row}: unknown sub-specialty code `{code}`")]
    UnknownSpecialty { row: usize, code: String },
    #[error("catalog row {row}: expected `journal_name,specialty_code`")]
    MalformedRow { row: usize },
    #[error("journal `{0}` is not in the catalog")]
    UnroutedJournal(String),
    #[error("unknown tokenizer `{0}`")]
    UnknownTokenizer(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Case-folds and collapses internal whitespace.
pub fn normalize_journal(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Immutable journal → sub-specialty mapping.
#[derive(Debug, Clone, Default)]
pub struct JournalCatalog {
    entries: HashMap<String, SubSpecialty>,
}

impl JournalCatalog {
    pub fn from_entries<I, S>(entries: I) -> Result<Self, PartitionError>
    where
        I: IntoIterator<Item = (S, SubSpecialty)>,
        S: AsRef<str>,
    {
        let mut catalog = JournalCatalog::default();
        for (name, spec) in entries {
            catalog.insert(name.as_ref(), spec)?;
        }
        Ok(catalog)
    }

    fn insert(&mut self, name: &str, spec: SubSpecialty) -> Result<(), PartitionError> {
        let key = normalize_journal(name);
        match self.entries.get(&key) {
            Some(&existing) if existing != spec => Err(PartitionError::DuplicateJournal {
                name: name.trim().to_string(),
                first: existing,
                second: spec,
            }),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(key, spec);
                Ok(())
            }
        }
    }

    /// Reads `journal_name,specialty_code` rows; a matching header row is skipped.
    pub fn load<R: Read>(source: R) -> Result<Self, PartitionError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let mut catalog = JournalCatalog::default();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let rowno = i + 1;
            if row.iter().all(str::is_empty) {
                continue;
            }
            if row.len() != 2 {
                return Err(PartitionError::MalformedRow { row: rowno });
            }
            let (name, code) = (&row[0], &row[1]);
            if rowno == 1 && name == "journal_name" && code == "specialty_code" {
                continue;
            }
            if name.is_empty() {
                return Err(PartitionError::MalformedRow { row: rowno });
            }
            let spec =
                code.parse::<SubSpecialty>()
                    .map_err(|_| PartitionError::UnknownSpecialty {
                        row: rowno,
                        code: code.to_string(),
                    })?;
            catalog.insert(name, spec)?;
        }
        Ok(catalog)
    }

    pub fn load_path(path: &Path) -> Result<Self, PartitionError> {
        Self::load(std::fs::File::open(path)?)
    }

    pub fn lookup(&self, journal: &str) -> Option<SubSpecialty> {
        self.entries.get(&normalize_journal(journal)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Catalog journal count per specialty, in code order.
    pub fn journal_counts(&self) -> BTreeMap<SubSpecialty, usize> {
        let mut counts: BTreeMap<_, _> = SubSpecialty::ALL_CODES.iter().map(|&s| (s, 0)).collect();
        for spec in self.entries.values() {
            *counts.entry(*spec).or_default() += 1;
        }
        counts
    }

    /// Every (normalized name, specialty) pair, in specialty then name order.
    pub fn entries(&self) -> Vec<(&str, SubSpecialty)> {
        let mut all: Vec<(&str, SubSpecialty)> =
            self.entries.iter().map(|(n, &s)| (n.as_str(), s)).collect();
        all.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        all
    }

    /// Normalized journal names, sorted.
    pub fn journals_for(&self, spec: SubSpecialty) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, &s)| s == spec)
            .map(|(n, _)| n.as_str())
            .collect();
        names.sort_unstable();
        names
    }
}

pub fn route_paper(
    record: &PaperRecord,
    catalog: &JournalCatalog,
) -> Result<SubSpecialty, PartitionError> {
    catalog
        .lookup(&record.journal)
        .ok_or_else(|| PartitionError::UnroutedJournal(record.journal.trim().to_string()))
}

/// Text → token count.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn count(&self, text: &str) -> usize;
}

/// Splits on Unicode whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Alphanumeric runs plus each punctuation character as its own token.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordPunctTokenizer;

impl Tokenizer for WordPunctTokenizer {
    fn name(&self) -> &str {
        "wordpunct"
    }

    fn count(&self, text: &str) -> usize {
        let mut count = 0;
        let mut in_word = false;
        for c in text.chars() {
            if c.is_alphanumeric() {
                if !in_word {
                    count += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    count += 1;
                }
            }
        }
        count
    }
}

pub fn tokenizer_by_name(name: &str) -> Result<Box<dyn Tokenizer>, PartitionError> {
    match name {
        "whitespace" => Ok(Box::new(WhitespaceTokenizer)),
        "wordpunct" => Ok(Box::new(WordPunctTokenizer)),
        other => Err(PartitionError::UnknownTokenizer(other.to_string())),
    }
}

pub fn count_tokens(text: &str, tokenizer: &dyn Tokenizer) -> usize {
    tokenizer.count(text)
}

/// Records grouped by sub-specialty; every code is present, possibly empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub groups: BTreeMap<SubSpecialty, Vec<PaperRecord>>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes `<dir>/<CODE>.jsonl` for all eleven codes.
    pub fn write_dir(&self, dir: &Path) -> Result<(), PartitionError> {
        std::fs::create_dir_all(dir)?;
        for (spec, records) in &self.groups {
            crate::corpus::write_corpus(records, &dir.join(format!("{}.jsonl", spec.code())))?;
        }
        Ok(())
    }

    /// Reads whichever `<CODE>.jsonl` files exist under `dir`.
    pub fn read_dir(dir: &Path) -> Result<Self, PartitionError> {
        let mut groups = BTreeMap::new();
        for spec in SubSpecialty::ALL_CODES {
            let path = dir.join(format!("{}.jsonl", spec.code()));
            let records = if path.exists() {
                crate::corpus::read_corpus(&path)?
            } else {
                Vec::new()
            };
            groups.insert(spec, records);
        }
        Ok(Partition { groups })
    }

    pub fn records(&self) -> impl Iterator<Item = &PaperRecord> {
        self.groups.values().flatten()
    }
}

/// Routes every record; the first uncataloged journal aborts.
///
/// Routed records carry their specialty. Within a group, input order is kept.
pub fn partition_corpus(
    records: &[PaperRecord],
    catalog: &JournalCatalog,
) -> Result<Partition, PartitionError> {
    let mut groups: BTreeMap<_, _> = SubSpecialty::ALL_CODES
        .iter()
        .map(|&s| (s, Vec::new()))
        .collect();
    for record in records {
        let spec = route_paper(record, catalog)?;
        let mut routed = record.clone();
        routed.specialty = Some(spec);
        groups
            .get_mut(&spec)
            .expect("all codes present")
            .push(routed);
    }
    Ok(Partition { groups })
}

/// Eleven specialty rows in code order, then the totals row.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
    pub total: StatsRow,
}

impl StatsTable {
    /// Builds a table from per-specialty rows, deriving the totals row.
    pub fn from_rows(rows: Vec<StatsRow>) -> Self {
        let sum_opt = |f: fn(&StatsRow) -> Option<u64>| -> Option<u64> {
            rows.iter()
                .map(f)
                .try_fold(0u64, |acc, v| v.map(|v| acc + v))
        };
        let mut total = StatsRow::new(
            None,
            rows.iter().map(|r| r.journals).sum(),
            rows.iter().map(|r| r.papers).sum(),
        );
        total.tokens = rows.iter().map(|r| r.tokens).sum();
        total.qa_pairs = rows.iter().map(|r| r.qa_pairs).sum();
        total.pt_steps = sum_opt(|r| r.pt_steps);
        total.sft_steps = sum_opt(|r| r.sft_steps);
        StatsTable { rows, total }
    }

    pub fn row(&self, spec: SubSpecialty) -> &StatsRow {
        self.rows
            .iter()
            .find(|r| r.specialty == Some(spec))
            .expect("table holds every specialty")
    }

    /// Attaches pass-through training step counts and refreshes totals.
    pub fn with_steps(mut self, steps: &StepCounts) -> Self {
        for row in &mut self.rows {
            if let Some(&(pt, sft)) = row.specialty.and_then(|s| steps.get(&s)) {
                row.pt_steps = pt;
                row.sft_steps = sft;
            }
        }
        StatsTable::from_rows(self.rows)
    }

    pub fn all_rows(&self) -> impl Iterator<Item = &StatsRow> {
        self.rows.iter().chain(std::iter::once(&self.total))
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let rows: Vec<StatsRow> = self.all_rows().cloned().collect();
        crate::corpus::write_stats_csv(&rows, out)
    }
}

/// Per-specialty statistics over a routed corpus.
///
/// `journals` counts distinct journals actually observed, not catalog size.
pub fn compute_stats(
    records: &[PaperRecord],
    catalog: &JournalCatalog,
    tokenizer: &dyn Tokenizer,
    qa_dataset: Option<&[QaPair]>,
) -> Result<StatsTable, PartitionError> {
    let mut journals: BTreeMap<SubSpecialty, BTreeSet<String>> = BTreeMap::new();
    let mut papers: BTreeMap<SubSpecialty, u64> = BTreeMap::new();
    let mut tokens: BTreeMap<SubSpecialty, u64> = BTreeMap::new();
    for record in records {
        let spec = route_paper(record, catalog)?;
        journals
            .entry(spec)
            .or_default()
            .insert(normalize_journal(&record.journal));
        *papers.entry(spec).or_default() += 1;
        *tokens.entry(spec).or_default() += tokenizer.count(&record.abstract_text) as u64;
    }
    let mut qa: BTreeMap<SubSpecialty, u64> = BTreeMap::new();
    for pair in qa_dataset.unwrap_or(&[]) {
        *qa.entry(pair.specialty).or_default() += 1;
    }

    let rows = SubSpecialty::ALL_CODES
        .iter()
        .map(|&spec| {
            let mut row = StatsRow::new(
                Some(spec),
                journals.get(&spec).map_or(0, |j| j.len() as u64),
                papers.get(&spec).copied().unwrap_or(0),
            );
            row.tokens = tokens.get(&spec).copied().unwrap_or(0);
            row.qa_pairs = qa.get(&spec).copied().unwrap_or(0);
            row
        })
        .collect();
    Ok(StatsTable::from_rows(rows))
}

/// Pass-through `(pt_steps, sft_steps)` per specialty.
pub type StepCounts = BTreeMap<SubSpecialty, (Option<u64>, Option<u64>)>;

/// Reads a `specialty,pt_steps,sft_steps` CSV of pass-through step counts.
pub fn load_steps<R: Read>(source: R) -> Result<StepCounts, PartitionError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let rowno = i + 2;
        if row.len() != 3 {
            return Err(PartitionError::MalformedRow { row: rowno });
        }
        let spec =
            row[0]
                .parse::<SubSpecialty>()
                .map_err(|_| PartitionError::UnknownSpecialty {
                    row: rowno,
                    code: row[0].to_string(),
                })?;
        let num = |s: &str| -> Result<Option<u64>, PartitionError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| PartitionError::MalformedRow { row: rowno })
            }
        };
        out.insert(spec, (num(&row[1])?, num(&row[2])?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pmid: &str, journal: &str, abstract_text: &str) -> PaperRecord {
        PaperRecord {
            pmid: pmid.into(),
            journal: journal.into(),
            title: "t".into(),
            abstract_text: abstract_text.into(),
            pub_year: 2015,
            specialty: None,
        }
    }

    fn catalog() -> JournalCatalog {
        JournalCatalog::load(
            "journal_name,specialty_code\nCirculation,CAR\nGut,GAS\nBlood,HEM\n".as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn load_catalog_happy_path() {
        let c = catalog();
        assert_eq!(c.len(), 3);
        let counts = c.journal_counts();
        assert_eq!(counts[&SubSpecialty::CAR], 1);
        assert_eq!(counts[&SubSpecialty::ONC], 0);
        assert_eq!(counts.len(), 11);
    }

    #[test]
    fn conflicting_journal_is_error() {
        let err =
            JournalCatalog::load("Circulation,CAR\ncirculation ,MED\n".as_bytes()).unwrap_err();
        match err {
            PartitionError::DuplicateJournal { first, second, .. } => {
                assert_eq!((first, second), (SubSpecialty::CAR, SubSpecialty::MED));
            }
            other => panic!("unexpected {other:?}"),
        }
        // the same assignment twice is harmless
        assert_eq!(
            JournalCatalog::load("Gut,GAS\nGUT,GAS\n".as_bytes())
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn unknown_code_is_error() {
        let err = JournalCatalog::load("Circulation,XYZ\n".as_bytes()).unwrap_err();
        assert!(
            matches!(err, PartitionError::UnknownSpecialty { row: 1, ref code } if code == "XYZ")
        );
    }

    #[test]
    fn quoted_journal_names_with_commas() {
        let c = JournalCatalog::load(
            "\"Journal of Allergy and Clinical Immunology, The\",ALL\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(
            c.lookup("journal of allergy and clinical immunology,  the"),
            Some(SubSpecialty::ALL)
        );
    }

    #[test]
    fn routing_normalizes() {
        let c = catalog();
        assert_eq!(
            route_paper(&rec("1", "Circulation", "x"), &c).unwrap(),
            SubSpecialty::CAR
        );
        assert_eq!(
            route_paper(&rec("1", "  GUT ", "x"), &c).unwrap(),
            SubSpecialty::GAS
        );
        assert!(matches!(
            route_paper(&rec("1", "Lancet", "x"), &c),
            Err(PartitionError::UnroutedJournal(j)) if j == "Lancet"
        ));
    }

    #[test]
    fn whitespace_tokens() {
        let t = WhitespaceTokenizer;
        assert_eq!(count_tokens("on-pump and off-pump groups", &t), 4);
        assert_eq!(count_tokens("", &t), 0);
        assert_eq!(count_tokens("a\u{00a0}b\tc\n", &t), 3);
        assert_eq!(WordPunctTokenizer.count("on-pump groups."), 5);
    }

    #[test]
    fn empty_corpus_stats() {
        let table = compute_stats(&[], &catalog(), &WhitespaceTokenizer, None).unwrap();
        assert_eq!(table.rows.len(), 11);
        assert!(table
            .all_rows()
            .all(|r| r.papers == 0 && r.papers_per_journal == 0.0));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .contains("ALL,0,0,0.00,0,0,,"));
    }

    #[test]
    fn stats_use_observed_journals() {
        let records = vec![
            rec("1", "Circulation", "one two three"),
            rec("2", "circulation", "four five"),
            rec("3", "Gut", "six"),
        ];
        let qa = vec![QaPair {
            question: "Q?".into(),
            answer: "A.".into(),
            specialty: SubSpecialty::GAS,
            source_pmid: "3".into(),
        }];
        let table = compute_stats(&records, &catalog(), &WhitespaceTokenizer, Some(&qa)).unwrap();
        let car = table.row(SubSpecialty::CAR);
        assert_eq!((car.journals, car.papers, car.tokens), (1, 2, 5));
        assert_eq!(car.papers_per_journal, 2.0);
        assert_eq!(table.row(SubSpecialty::GAS).qa_pairs, 1);
        assert_eq!(table.row(SubSpecialty::HEM).journals, 0);
        assert_eq!(
            (table.total.journals, table.total.papers, table.total.tokens),
            (2, 3, 6)
        );
        assert_eq!(table.total.papers_per_journal, 1.5);
    }

    #[test]
    fn stats_surface_unrouted() {
        let records = vec![rec("1", "Nature", "x")];
        assert!(matches!(
            compute_stats(&records, &catalog(), &WhitespaceTokenizer, None),
            Err(PartitionError::UnroutedJournal(_))
        ));
    }

    #[test]
    fn steps_pass_through() {
        let steps =
            load_steps("specialty,pt_steps,sft_steps\nALL,25000,1100\nCAR,130000,\n".as_bytes())
                .unwrap();
        let table = compute_stats(&[], &catalog(), &WhitespaceTokenizer, None)
            .unwrap()
            .with_steps(&steps);
        assert_eq!(table.row(SubSpecialty::ALL).sft_steps, Some(1100));
        assert_eq!(table.row(SubSpecialty::CAR).sft_steps, None);
        // a missing per-row value leaves the total undefined
        assert_eq!(table.total.pt_steps, None);
    }
}
