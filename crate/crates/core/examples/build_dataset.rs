//! Enumerates the leave-two-out splits of a seven-manuscript corpus and
//! builds the balanced pair sets for each.
//!
//! cargo run --release --example build_dataset -- [out_dir]

use std::path::PathBuf;

use scriptalign::dataset::{
    build_bundle, enumerate_split_plans, write_bundle, ManuscriptCorpus, PairOptions,
};
use scriptalign::synth::{generate_corpus, CorpusConfig};
use scriptalign::CanvasSpec;

fn main() -> scriptalign::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let canvas = CanvasSpec::new(41, 35)?;
    let docs = generate_corpus(&CorpusConfig {
        forms: 30,
        occurrences: 3,
        canvas,
        seed: 9,
        ..Default::default()
    })?;
    let corpus = ManuscriptCorpus::new(docs)?;
    let plans = enumerate_split_plans(&corpus, 9)?;
    println!(
        "{} manuscripts -> {} splits",
        corpus.documents().len(),
        plans.len()
    );
    println!(
        "{:<10} {:>6} {:>6} {:>6} {:>6}  shares",
        "held out", "train", "true", "valid", "test"
    );
    for plan in &plans {
        let b = build_bundle(&corpus, plan, PairOptions::default())?;
        let shares: Vec<String> = b
            .metadata
            .manuscript_share
            .iter()
            .map(|(m, s)| format!("{m}={s:.2}"))
            .collect();
        println!(
            "{:<10} {:>6} {:>6} {:>6} {:>6}  {}",
            plan.label(),
            b.train.len(),
            b.metadata.train_true,
            b.validation.len(),
            b.test.len(),
            shares.join(" ")
        );
        if let Some(dir) = &out {
            write_bundle(
                &b,
                &dir.join(format!("{}__{}", plan.heldout[0], plan.heldout[1])),
            )?;
        }
    }
    Ok(())
}
