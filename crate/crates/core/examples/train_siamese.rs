//! Trains a scaled-down twin on one leave-two-out split of a synthetic
//! corpus, saves the chosen epoch as a checkpoint and scores a few pairs
//! with the reloaded model.
//!
//! cargo run --release --example train_siamese -- [epochs]

use std::ops::ControlFlow;

use scriptalign::dataset::{build_bundle, enumerate_split_plans, ManuscriptCorpus, PairOptions};
use scriptalign::nn::{reduced_chain, Architecture, TrainConfig};
use scriptalign::siamese::{
    evaluate, load_checkpoint, save_checkpoint, train_with_progress, SiameseModel, SiameseScorer,
};
use scriptalign::synth::{generate_corpus, CorpusConfig};
use scriptalign::{CanvasSpec, SimilarityScorer};

fn main() -> scriptalign::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .map_or(10, |e| e.parse().expect("epoch count"));
    let canvas = CanvasSpec::new(41, 35)?;
    let docs = generate_corpus(&CorpusConfig {
        forms: 30,
        occurrences: 3,
        canvas,
        seed: 11,
        ..Default::default()
    })?;
    let corpus = ManuscriptCorpus::new(docs)?;
    let plan = enumerate_split_plans(&corpus, 3)?.pop().expect("21 plans");
    let bundle = build_bundle(
        &corpus,
        &plan,
        PairOptions {
            cap_per_form: 10,
            ..Default::default()
        },
    )?;
    println!(
        "held out {}: {} train / {} validation / {} test pairs",
        plan.label(),
        bundle.train.len(),
        bundle.validation.len(),
        bundle.test.len()
    );

    let arch = Architecture::new(reduced_chain(), canvas, 1.0 / 8.0)?;
    let config = TrainConfig {
        epochs,
        batch_size: 16,
        fan_in_init: true,
        seed: 1,
        ..Default::default()
    };
    let model = SiameseModel::init(arch, &config)?;
    let (best, report) = train_with_progress(model, &bundle, &config, |epoch, s| {
        println!(
            "epoch {epoch:>3}: loss {:.4}  train {:.3}  validation {:.3}",
            s.train_loss, s.train_accuracy, s.validation_accuracy
        );
        ControlFlow::Continue(())
    })?;
    println!(
        "best epoch {} (validation {:.3})",
        report.best_epoch, report.best_validation_accuracy
    );

    let path = std::env::temp_dir().join("scriptalign_example.ckpt");
    save_checkpoint(&best, &path, Some(&serde_json::to_value(&report)?))?;
    let scorer = SiameseScorer::new(load_checkpoint(&path)?);
    println!(
        "test accuracy {:.3} from {}",
        evaluate(&scorer, &bundle.test, 0.5)?,
        path.display()
    );
    for p in bundle.test.iter().take(4) {
        println!(
            "  {} vs {} ({}): {:.3}",
            p.left.source_label(),
            p.right.source_label(),
            if p.label { "same" } else { "different" },
            scorer.score(&p.left, &p.right)?
        );
    }
    Ok(())
}
