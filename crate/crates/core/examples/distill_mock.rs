//! Two-stage QA distillation with the deterministic mock client.
//!
//! ```text
//! cargo run --example distill_mock
//! ```

use medfleet::corpus::read_corpus;
use medfleet::distill::pipeline::Stage;
use medfleet::distill::{compute_cost, distill_corpus, DistillConfig, MockClient};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let records = read_corpus(&fixtures.join("abstracts.jsonl"))?;

    let out = distill_corpus(&records, &MockClient::default(), &DistillConfig::default())?;
    for pair in out.pairs.iter().take(5) {
        println!(
            "[{}] Q: {}\n      A: {}",
            pair.specialty, pair.question, pair.answer
        );
    }
    println!(
        "{} pairs from {} abstracts; dropped by keyword filter: {}, by question check: {}",
        out.pairs.len(),
        records.len(),
        out.dropped_at(Stage::Filter),
        out.dropped_at(Stage::Question),
    );

    let cost = compute_cost(&out.usage, 0.0015, 0.002)?;
    println!(
        "tokens: finding {}+{}, question {}+{}; cost {:.4}",
        cost.finding.usage.prompt_tokens,
        cost.finding.usage.completion_tokens,
        cost.question.usage.prompt_tokens,
        cost.question.usage.completion_tokens,
        cost.total
    );
    Ok(())
}
