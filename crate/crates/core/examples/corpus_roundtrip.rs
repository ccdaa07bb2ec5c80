//! Admission checks, JSONL round-trip and the papers-per-journal column.
//!
//! ```text
//! cargo run --example corpus_roundtrip
//! ```

use medfleet::corpus::{
    papers_per_journal, read_jsonl, validate_record, write_jsonl, PaperRecord, StatsRow,
    SubSpecialty, DEFAULT_MIN_YEAR,
};
use medfleet::partition::StatsTable;

fn record(pmid: &str, year: i32, abstract_text: &str) -> PaperRecord {
    PaperRecord {
        pmid: pmid.into(),
        journal: "Heart Rhythm Review".into(),
        title: format!("Paper {pmid}"),
        abstract_text: abstract_text.into(),
        pub_year: year,
        specialty: None,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let candidates = [
        record("1", 2015, "Ablation restored sinus rhythm."),
        record("2", 2009, "Published before the cut-off."),
        record("3", 2020, "   "),
    ];
    let mut admitted = Vec::new();
    for r in candidates {
        match validate_record(&r, DEFAULT_MIN_YEAR) {
            medfleet::corpus::Verdict::Accept => admitted.push(r),
            medfleet::corpus::Verdict::Reject(why) => println!("pmid {} rejected: {why}", r.pmid),
        }
    }

    let mut buf = Vec::new();
    write_jsonl(&admitted, &mut buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    let back: Vec<PaperRecord> = read_jsonl(&buf[..])?;
    assert_eq!(back, admitted);

    // Published per-specialty (journals, papers) counts.
    let published = [
        (SubSpecialty::ALL, 39, 5049),
        (SubSpecialty::CAR, 144, 57810),
        (SubSpecialty::MET, 185, 31056),
        (SubSpecialty::GAS, 140, 34964),
        (SubSpecialty::HEM, 98, 38816),
        (SubSpecialty::INF, 130, 29579),
        (SubSpecialty::ONC, 319, 77977),
        (SubSpecialty::RES, 102, 27160),
        (SubSpecialty::RHE, 56, 11553),
        (SubSpecialty::URO, 126, 31148),
        (SubSpecialty::MED, 330, 52490),
    ];
    let rows = published
        .iter()
        .map(|&(s, j, p)| StatsRow::new(Some(s), j, p))
        .collect();
    let table = StatsTable::from_rows(rows);
    table.write_csv(std::io::stdout())?;
    println!("CAR check: {:.2}", papers_per_journal(57810, 144));
    Ok(())
}
