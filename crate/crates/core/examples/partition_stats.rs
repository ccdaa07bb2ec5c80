//! Route a corpus through the journal catalog and print the statistics table.
//!
//! ```text
//! cargo run --example partition_stats
//! ```

use medfleet::corpus::read_corpus;
use medfleet::partition::{compute_stats, partition_corpus, JournalCatalog, WordPunctTokenizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let catalog = JournalCatalog::load_path(&fixtures.join("catalog.csv"))?;
    let records = read_corpus(&fixtures.join("abstracts.jsonl"))?;

    let parts = partition_corpus(&records, &catalog)?;
    for (spec, group) in &parts.groups {
        println!(
            "{:<3} {:>2} papers  {}",
            spec.code(),
            group.len(),
            spec.name()
        );
    }

    let table = compute_stats(&records, &catalog, &WordPunctTokenizer, None)?;
    table.write_csv(std::io::stdout())?;

    let mut stray = records[0].clone();
    stray.journal = "Uncataloged Veterinary Journal".into();
    if let Err(e) = partition_corpus(&[stray], &catalog) {
        println!("as expected: {e}");
    }
    Ok(())
}
