//! Five paired runs summarized as the infer-time / load-count table.
//!
//! ```text
//! cargo run --example reference_bench
//! ```

use medfleet::cli::run_bench;
use medfleet::sim::{summarize, SimConfig, SimReport, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reports = run_bench(&SimConfig::default(), 100, &[1, 2, 3, 4, 5])?;
    println!("simulated:");
    summarize(&reports)?.write_csv(std::io::stdout())?;

    let full = [
        (630.25, 63),
        (498.25, 47),
        (584.51, 60),
        (547.92, 54),
        (490.98, 47),
    ];
    let lora = [312.62, 315.46, 337.39, 314.94, 298.78];
    let mut published: Vec<SimReport> = full
        .iter()
        .map(|&(t, n)| SimReport::summary_only(Strategy::FullSwap, t, n, 0))
        .collect();
    published.extend(
        lora.iter()
            .map(|&t| SimReport::summary_only(Strategy::LoraSwap, t, 0, 100)),
    );
    println!("\npublished:");
    summarize(&published)?.write_csv(std::io::stdout())?;
    Ok(())
}
