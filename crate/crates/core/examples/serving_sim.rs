//! One 100-request run of each serving strategy on the same workload.
//!
//! ```text
//! cargo run --example serving_sim -- 7
//! ```

use medfleet::sim::{generate_workload, run_simulation, EventKind, SimConfig, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(7);
    let workload = generate_workload(100, seed);
    let config = SimConfig::default();

    for strategy in [Strategy::FullSwap, Strategy::LoraSwap] {
        let report = run_simulation(strategy, &workload, &config, seed)?;
        println!(
            "{:<4} total {:>7.2}s  model loads {:>3}  weight loads {:>3}  inference {:>7.2}s",
            strategy.label(),
            report.total_time_s,
            report.model_loads,
            report.weight_loads,
            report.infer_time_s
        );
        for e in report
            .events
            .iter()
            .filter(|e| e.event != EventKind::Infer)
            .take(4)
        {
            println!(
                "    #{:<3} {:?} {} {:.2}s",
                e.seq, e.event, e.specialty, e.duration_s
            );
        }
    }
    Ok(())
}
