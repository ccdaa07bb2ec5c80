//! Journal-level ingestion: page through search results, fetch, validate.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::client::{EutilsClient, FetchError, Fetched};
use super::query::{JournalQuery, QueryError};
use super::xml::{self, SkipReason};
use crate::corpus::{validate_record, PaperRecord, RejectReason, SubSpecialty, Verdict};

pub const DEFAULT_PAGE_SIZE: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum IngestSkip {
    Parse(SkipReason),
    Rejected(RejectReason),
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub pmid: String,
    pub reason: IngestSkip,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestSummary {
    pub journal: String,
    /// Records admitted to the corpus.
    pub fetched: usize,
    /// Responses served from the disk cache.
    pub cached_hits: usize,
    /// Responses that needed the network.
    pub network_responses: usize,
    /// Transport requests made, retries included.
    pub network_requests: usize,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub records: Vec<PaperRecord>,
    pub summary: IngestSummary,
}

#[derive(Debug, Error)]
pub enum IngestErrorKind {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
}

#[derive(Debug, Error)]
#[error("ingesting `{journal}`: {source}")]
pub struct IngestError {
    pub journal: String,
    #[source]
    pub source: IngestErrorKind,
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub min_year: i32,
    pub page_size: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            min_year: crate::corpus::DEFAULT_MIN_YEAR,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

fn tally(summary: &mut IngestSummary, fetched: &Fetched) {
    if fetched.from_cache {
        summary.cached_hits += 1;
    } else {
        summary.network_responses += 1;
        summary.network_requests += fetched.attempts as usize;
    }
}

/// Pulls every article of one journal, admitting only records that pass
/// [`validate_record`]. Record order follows the search result order.
pub fn ingest_journal(
    client: &EutilsClient,
    journal: &str,
    specialty: SubSpecialty,
    options: IngestOptions,
) -> Result<IngestOutcome, IngestError> {
    let wrap = |source: IngestErrorKind| IngestError {
        journal: journal.to_string(),
        source,
    };
    let base = JournalQuery::new(journal, options.min_year, options.page_size)
        .map_err(|e| wrap(e.into()))?;

    let mut summary = IngestSummary {
        journal: journal.trim().to_string(),
        ..Default::default()
    };
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut offset = 0;
    loop {
        let query = base.at_offset(offset);
        let (page, fetched) = client.search_ids(&query).map_err(|e| wrap(e.into()))?;
        tally(&mut summary, &fetched);
        if page.ids.is_empty() {
            break;
        }
        let fetched = client
            .fetch_articles(&query, &page.ids)
            .map_err(|e| wrap(e.into()))?;
        tally(&mut summary, &fetched);
        let parsed =
            xml::parse_pubmed_xml(&fetched.body).map_err(|e| wrap(FetchError::from(e).into()))?;
        for (pmid, reason) in parsed.skipped {
            summary.skipped.push(SkippedRecord {
                pmid,
                reason: IngestSkip::Parse(reason),
            });
        }
        for mut record in parsed.records {
            if !seen.insert(record.pmid.clone()) {
                summary.skipped.push(SkippedRecord {
                    pmid: record.pmid,
                    reason: IngestSkip::Duplicate,
                });
                continue;
            }
            match validate_record(&record, options.min_year) {
                Verdict::Accept => {
                    record.specialty = Some(specialty);
                    records.push(record);
                }
                Verdict::Reject(reason) => summary.skipped.push(SkippedRecord {
                    pmid: record.pmid,
                    reason: IngestSkip::Rejected(reason),
                }),
            }
        }
        offset += page.ids.len();
        if offset >= page.total_count {
            break;
        }
    }
    summary.fetched = records.len();
    Ok(IngestOutcome { records, summary })
}

/// Ingests several journals on `workers` threads sharing one client (and so
/// one rate limiter). Results come back in input order.
pub fn ingest_journals(
    client: &EutilsClient,
    jobs: &[(String, SubSpecialty)],
    options: IngestOptions,
    workers: usize,
) -> Vec<Result<IngestOutcome, IngestError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<IngestOutcome, IngestError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((journal, spec)) = jobs.get(i) else {
                    break;
                };
                let result = ingest_journal(client, journal, *spec, options);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every job ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pubmed::client::FetchCachePolicy;
    use crate::pubmed::fixture::{FixtureArticle, FixtureEutils};
    use crate::pubmed::ratelimit::FakeClock;
    use std::sync::Arc;

    fn fixture() -> FixtureEutils {
        FixtureEutils::new(vec![
            FixtureArticle::new("10", "Gut", 2012, "First."),
            FixtureArticle::new("11", "Gut", 2008, "Too old."),
            FixtureArticle::new("12", "Gut", 2019, "Third."),
            FixtureArticle {
                sections: vec![],
                ..FixtureArticle::new("13", "Gut", 2020, "")
            },
        ])
    }

    fn client(dir: &std::path::Path, service: &FixtureEutils) -> EutilsClient {
        EutilsClient::new(&FetchCachePolicy::new(dir), Arc::new(service.clone()))
            .with_base_url("http://fixture/eutils")
            .with_clock(Arc::new(FakeClock::new()))
    }

    #[test]
    fn skips_old_and_abstractless() {
        let dir = tempfile::tempdir().unwrap();
        let service = fixture();
        let out = ingest_journal(
            &client(dir.path(), &service),
            "Gut",
            SubSpecialty::GAS,
            IngestOptions {
                min_year: 2010,
                page_size: 2,
            },
        )
        .unwrap();
        let ids: Vec<_> = out.records.iter().map(|r| r.pmid.as_str()).collect();
        assert_eq!(ids, ["10", "12"]);
        assert!(out
            .records
            .iter()
            .all(|r| r.specialty == Some(SubSpecialty::GAS)));
        assert!(out.summary.skipped.contains(&SkippedRecord {
            pmid: "11".into(),
            reason: IngestSkip::Rejected(RejectReason::TooOld(2008)),
        }));
        assert!(out.summary.skipped.contains(&SkippedRecord {
            pmid: "13".into(),
            reason: IngestSkip::Parse(SkipReason::NoAbstract),
        }));
        // two pages, each one search and one fetch
        assert_eq!(out.summary.network_responses, 4);
    }

    #[test]
    fn duplicate_ids_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let service = FixtureEutils::new(vec![FixtureArticle::new("1", "Gut", 2012, "A.")]);
        let c = client(dir.path(), &service);
        let base = JournalQuery::new("Gut", 2010, 5).unwrap();
        // poison the fetch cache with a doubled article set
        let doubled = format!(
            "<PubmedArticleSet>{}{}</PubmedArticleSet>",
            FixtureArticle::new("1", "Gut", 2012, "A.").to_xml(),
            FixtureArticle::new("1", "Gut", 2012, "A.").to_xml()
        );
        let key = crate::pubmed::client::DiskCache::key(
            crate::pubmed::client::Endpoint::Fetch,
            &base.term(),
            &base.page_token(),
        );
        c.cache().put(&key, doubled.as_bytes()).unwrap();
        let out = ingest_journal(
            &c,
            "Gut",
            SubSpecialty::GAS,
            IngestOptions {
                min_year: 2010,
                page_size: 5,
            },
        )
        .unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.summary.skipped[0].reason, IngestSkip::Duplicate);
    }

    #[test]
    fn errors_carry_journal() {
        let dir = tempfile::tempdir().unwrap();
        let mut policy = FetchCachePolicy::new(dir.path());
        policy.offline_only = true;
        let c = EutilsClient::new(&policy, Arc::new(fixture()));
        let err =
            ingest_journal(&c, "Gut", SubSpecialty::GAS, IngestOptions::default()).unwrap_err();
        assert_eq!(err.journal, "Gut");
        assert!(err.to_string().contains("Gut"));
    }
}
