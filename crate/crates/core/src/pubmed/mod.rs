//! PubMed E-utilities ingestion.
//!
//! Turns journal names into validated [`PaperRecord`](crate::corpus::PaperRecord)s.
//! Raw responses are cached on disk so repeated runs need no network.

pub mod client;
pub mod fixture;
pub mod ingest;
pub mod query;
pub mod ratelimit;
pub mod xml;

pub use client::{EutilsClient, FetchCachePolicy, FetchError, Transport, UreqTransport};
pub use fixture::{FixtureArticle, FixtureEutils};
pub use ingest::{ingest_journal, ingest_journals, IngestOptions, IngestSummary};
pub use query::{build_journal_query, JournalQuery};
pub use ratelimit::{Clock, FakeClock, RateLimiter, SystemClock};
pub use xml::{parse_pubmed_xml, SkipReason};
