//! Memory footprint of eleven adapters against full-model copies.
//!
//! ```text
//! cargo run --example fleet_report
//! ```

use medfleet::adapter::{capacity, fleet_report, synthetic_fleet, ModelSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A 7B model at one byte per parameter, adapted on one block's q/v projections.
    let model = ModelSpec::new(7_000_000_000, 1.0)
        .with_layer("layers.0.q_proj", 4096, 4096)
        .with_layer("layers.0.v_proj", 4096, 4096);
    let budget = 40.0e9;
    println!(
        "full models that fit in 40 GB: {}",
        capacity(budget, &model)?
    );

    let fleet = synthetic_fleet(&model, 8, 0)?;
    print!("{}", fleet_report(&model, &fleet, budget)?.render());
    Ok(())
}
