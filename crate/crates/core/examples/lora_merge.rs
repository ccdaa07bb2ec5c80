//! Merge and unmerge low-rank deltas, then hot-swap specialties on one base.
//!
//! ```text
//! cargo run --example lora_merge
//! ```

use std::collections::BTreeMap;

use medfleet::adapter::{lora_merge, lora_unmerge, synthetic_fleet, LayerDelta, Matrix, ModelSpec};
use medfleet::corpus::SubSpecialty;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delta = LayerDelta::new(
        "w",
        Matrix::from_rows(&[vec![0.0, 1.0]]),
        Matrix::from_rows(&[vec![1.0], vec![0.0]]),
        1.0,
    )?;
    let merged = lora_merge(&Matrix::identity(2), &delta)?;
    println!("I + B·A = {:?}", merged.as_slice());
    println!("unmerged = {:?}", lora_unmerge(&merged, &delta)?.as_slice());

    let model = ModelSpec::new(0, 1.0)
        .with_layer("q_proj", 64, 64)
        .with_layer("v_proj", 64, 64);
    let fleet = synthetic_fleet(&model, 8, 7)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let base: BTreeMap<String, Matrix> = model
        .layers
        .iter()
        .map(|(n, &(d, k))| (n.clone(), Matrix::random(d, k, 1.0, &mut rng)))
        .collect();

    let mut weights = base.clone();
    for spec in [SubSpecialty::CAR, SubSpecialty::ONC, SubSpecialty::RHE] {
        let adapter = fleet.lookup(spec)?;
        adapter.merge_into(&mut weights)?;
        let shift = weights["q_proj"].max_abs_diff(&base["q_proj"]);
        adapter.unmerge_from(&mut weights)?;
        let residue = weights["q_proj"].max_abs_diff(&base["q_proj"]);
        println!("{spec}: max shift {shift:.4}, residue after unmerge {residue:.1e}");
    }
    Ok(())
}
