//! Aligns a rendered synthetic pair written in two different hands and
//! saves JSON, TSV and a self-contained HTML report.
//!
//! cargo run --release --example html_report -- [out_dir]

use std::path::PathBuf;

use scriptalign::align::{
    align_documents, alignment_accuracy, ops_json, ops_tsv, write_html, AlignConfig,
};
use scriptalign::siamese::OracleScorer;
use scriptalign::synth::{attach_images, generate_pair, SynthConfig};
use scriptalign::CanvasSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(std::env::temp_dir, PathBuf::from);
    std::fs::create_dir_all(&out)?;
    let mut pair = generate_pair(&SynthConfig {
        lines: 2,
        tokens_per_line: (10, 14),
        p_replace: 0.05,
        seed: 8,
        ..Default::default()
    })?;
    let canvas = CanvasSpec::new(41, 35)?;
    attach_images(&mut pair.left, 0, canvas, false);
    attach_images(&mut pair.right, 3, canvas, false);

    let results = align_documents(
        &pair.left,
        &pair.right,
        &AlignConfig::default(),
        &OracleScorer::new(0.02, 8)?,
    )?;
    for (k, (r, truth)) in results.iter().zip(&pair.truth).enumerate() {
        println!(
            "line {k}: {} ops, accuracy {:.3}",
            r.ops.len(),
            alignment_accuracy(&r.ops, truth)?
        );
    }
    let json = serde_json::to_string_pretty(&ops_json(&pair.left, &pair.right, &results))?;
    let (j, t, h) = (
        out.join("alignment.json"),
        out.join("alignment.tsv"),
        out.join("alignment.html"),
    );
    std::fs::write(&j, json)?;
    std::fs::write(&t, ops_tsv(&pair.left, &pair.right, &results))?;
    write_html(&h, &pair.left, &pair.right, &results)?;
    println!("wrote {}, {} and {}", j.display(), t.display(), h.display());
    Ok(())
}
