//! Renders a synthetic multi-manuscript corpus to disk: one PNG per subword
//! and a manifest CSV that the dataset builder and the CLI read.
//!
//! cargo run --release --example synth_corpus -- [out_dir]

use std::path::PathBuf;

use scriptalign::dataset::{load_corpus, ImageLoading};
use scriptalign::synth::{
    generate_corpus, pixel_difference, style_params, write_corpus, CorpusConfig,
};

fn main() -> scriptalign::Result<()> {
    let out = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("scriptalign_corpus"),
        PathBuf::from,
    );
    let config = CorpusConfig {
        forms: 20,
        occurrences: 2,
        seed: 42,
        ..Default::default()
    };
    let mut docs = generate_corpus(&config)?;
    for (k, d) in docs.iter().enumerate() {
        let s = style_params(k as u32);
        println!(
            "{}: {} lines, {} tokens, stroke {:.2}px, slant {:+.2}, scale {:.2}",
            d.manuscript_id,
            d.lines.len(),
            d.token_count(),
            s.stroke_width,
            s.slant,
            s.scale
        );
    }
    // Same form across styles versus two forms within one style.
    let find = |doc: usize, form: &str| {
        docs[doc]
            .tokens()
            .find(|t| t.form_id == form)
            .unwrap()
            .image()
            .unwrap()
            .clone()
    };
    println!(
        "pixel difference: f0 ms0 vs f0 ms1 = {:.4}, f0 ms0 vs f1 ms0 = {:.4}",
        pixel_difference(&find(0, "f0"), &find(1, "f0")),
        pixel_difference(&find(0, "f0"), &find(0, "f1"))
    );

    let manifest = write_corpus(&mut docs, &out)?;
    let reloaded = load_corpus(&manifest, ImageLoading::Load(config.canvas))?;
    println!(
        "wrote {} ({} manuscripts, {} forms, {} tokens)",
        manifest.display(),
        reloaded.documents().len(),
        reloaded.form_count(),
        reloaded.token_count()
    );
    Ok(())
}
