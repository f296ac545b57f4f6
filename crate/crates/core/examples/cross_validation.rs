//! Runs the 21-split leave-two-out evaluation, once with a noisy oracle
//! standing in for a trained model and once training a tiny twin per split.
//!
//! cargo run --release --example cross_validation -- [workers]

use scriptalign::dataset::{ManuscriptCorpus, PairOptions};
use scriptalign::eval::{run_cross_validation, run_cross_validation_with, Fitted};
use scriptalign::nn::{reduced_chain, Architecture, TrainConfig};
use scriptalign::siamese::OracleScorer;
use scriptalign::synth::{generate_corpus, CorpusConfig};
use scriptalign::CanvasSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let workers: usize = std::env::args()
        .nth(1)
        .map_or(2, |w| w.parse().expect("worker count"));
    let canvas = CanvasSpec::new(23, 19)?;
    let docs = generate_corpus(&CorpusConfig {
        forms: 12,
        occurrences: 2,
        canvas,
        seed: 4,
        ..Default::default()
    })?;
    let corpus = ManuscriptCorpus::new(docs)?;
    let options = PairOptions {
        cap_per_form: 6,
        ..Default::default()
    };

    let oracle = run_cross_validation_with(&corpus, options, 4, workers, |bundle| {
        Ok(Fitted {
            scorer: Box::new(OracleScorer::new(0.08, bundle.plan.seed)?),
            best_epoch: None,
        })
    })?;
    println!(
        "oracle (8% flips): mean test {:.3} over {} splits",
        oracle.mean_test_accuracy,
        oracle.rows.len()
    );

    let arch = Architecture::new(reduced_chain(), canvas, 1.0 / 8.0)?;
    let config = TrainConfig {
        epochs: 10,
        batch_size: 16,
        fan_in_init: true,
        ..Default::default()
    };
    let trained = run_cross_validation(&corpus, &arch, &config, options, 4, workers)?;
    print!("{}", trained.to_csv());
    let settings =
        serde_json::json!({ "arch": "reduced", "multiplier": 1.0 / 8.0, "train": config });
    let path = std::env::temp_dir().join("scriptalign_cv_summary.json");
    std::fs::write(&path, trained.summary_json(&settings)?)?;
    println!(
        "trained twin: mean test {:.3}, summary in {}",
        trained.mean_test_accuracy,
        path.display()
    );
    Ok(())
}
