//! Prints the layer-by-layer geometry and parameter counts of the twin.
//!
//! cargo run --release --example shape_chain -- [multiplier]

use scriptalign::nn::{full_chain, reduced_chain, Architecture, ModelParams};
use scriptalign::CanvasSpec;

fn main() -> scriptalign::Result<()> {
    let multiplier: f64 = std::env::args()
        .nth(1)
        .map_or(1.0, |m| m.parse().expect("multiplier"));
    for (name, chain, canvas) in [
        ("full", full_chain(), CanvasSpec::default()),
        ("reduced", reduced_chain(), CanvasSpec::new(23, 19)?),
    ] {
        let arch = Architecture::new(chain, canvas, multiplier)?;
        let params = ModelParams::zeros(&arch).count();
        println!("{name} twin on {canvas} at multiplier {multiplier}:");
        for spec in arch.specs() {
            print!("{spec}  ");
        }
        println!("\n  {}", arch.shape_chain().join(" -> "));
        println!(
            "  embedding {} values, {params} twin parameters\n",
            arch.embedding_len()
        );
    }
    // Too small a canvas is rejected before any weights exist.
    match Architecture::new(full_chain(), CanvasSpec::new(40, 40)?, 1.0) {
        Ok(_) => println!("40x40 unexpectedly accepted"),
        Err(e) => println!("40x40 rejected: {e}"),
    }
    Ok(())
}
