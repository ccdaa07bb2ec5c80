//! Harvest a journal set from the bundled fixture E-utilities server.
//!
//! The server runs on loopback. The second pass is answered from the disk
//! cache alone.
//!
//! ```text
//! cargo run --example pubmed_fixture_ingest
//! ```

use std::sync::Arc;

use medfleet::partition::JournalCatalog;
use medfleet::pubmed::{
    ingest_journals, EutilsClient, FetchCachePolicy, FixtureEutils, IngestOptions, UreqTransport,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let service =
        FixtureEutils::from_json(&std::fs::read_to_string(fixtures.join("articles.json"))?)?;
    let server = service.serve()?;
    let catalog = JournalCatalog::load_path(&fixtures.join("catalog.csv"))?;
    let jobs: Vec<_> = catalog
        .entries()
        .into_iter()
        .map(|(n, s)| (n.to_string(), s))
        .collect();

    let cache = tempfile::tempdir()?;
    let options = IngestOptions {
        page_size: 5,
        ..IngestOptions::default()
    };
    for pass in 1..=2 {
        let transport = Arc::new(UreqTransport::new(std::time::Duration::from_secs(10)));
        let client = EutilsClient::new(&FetchCachePolicy::new(cache.path()), transport)
            .with_base_url(server.base_url());
        let mut records = 0;
        let mut skipped = 0;
        for outcome in ingest_journals(&client, &jobs, options, 4) {
            let outcome = outcome?;
            records += outcome.records.len();
            skipped += outcome.summary.skipped.len();
        }
        println!(
            "pass {pass}: {records} records, {skipped} skipped, {} network requests",
            client.network_requests()
        );
    }
    println!("server saw {} requests in total", service.request_count());
    Ok(())
}
