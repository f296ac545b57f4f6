use serde::{Deserialize, Serialize};

use super::{add_into, SiameseModel, SiameseParams, SiameseScorer};
use crate::dataset::{DatasetBundle, PairSample};
use crate::error::{Error, Result};
use crate::nn::{Sgd, TrainConfig};
use crate::seed;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    /// Running accuracy of the train-mode predictions made during the epoch.
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_validation_accuracy: f64,
}

/// Summed gradient over `batch`, plus the summed loss and the number of
/// correct train-mode decisions.
pub fn batch_gradient(
    model: &SiameseModel,
    batch: &[&PairSample],
    dropout_seed: u64,
) -> Result<(SiameseParams, f64, usize)> {
    let mut acc: Option<SiameseParams> = None;
    let mut loss = 0.0;
    let mut correct = 0;
    for (i, pair) in batch.iter().enumerate() {
        let g = model.pair_gradient(
            pair.left.image()?,
            pair.right.image()?,
            pair.label,
            seed::derive_n(dropout_seed, &[i as u64]),
        )?;
        loss += g.loss;
        if (g.probability >= super::DECISION_THRESHOLD) == pair.label {
            correct += 1;
        }
        match acc.as_mut() {
            Some(a) => add_into(a, &g.grads),
            None => acc = Some(g.grads),
        }
    }
    let grads = acc.ok_or(Error::EmptySet("batch gradient"))?;
    Ok((grads, loss, correct))
}

/// Mini-batch SGD with momentum for `config.epochs` epochs, keeping the
/// parameters of the epoch with the best validation accuracy (earliest on
/// ties).
pub fn train(
    model: SiameseModel,
    bundle: &DatasetBundle,
    config: &TrainConfig,
) -> Result<(SiameseModel, TrainReport)> {
    train_with_progress(model, bundle, config, |_, _| ControlFlow::Continue(()))
}

/// Like [`train`], calling `progress(epoch, stats)` after every epoch.
/// Returning `ControlFlow::Break` ends training after that epoch; the
/// best epoch is still chosen among those that ran.
pub fn train_with_progress(
    mut model: SiameseModel,
    bundle: &DatasetBundle,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, &EpochStats) -> ControlFlow<()>,
) -> Result<(SiameseModel, TrainReport)> {
    config.validate()?;
    if bundle.train.is_empty() {
        return Err(Error::EmptySet("training pairs"));
    }
    if bundle.validation.is_empty() {
        return Err(Error::EmptySet("validation pairs"));
    }
    let mut order: Vec<usize> = (0..bundle.train.len()).collect();
    let mut sgd = Sgd::new();
    let mut best: Option<(usize, f64, SiameseParams)> = None;
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let epoch_seed = seed::derive_n(config.seed, &[epoch as u64]);
        order.shuffle(&mut seed::rng(epoch_seed));
        let (mut loss, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&PairSample> = chunk.iter().map(|&i| &bundle.train[i]).collect();
            let (grads, l, c) =
                batch_gradient(&model, &batch, seed::derive_n(epoch_seed, &[b as u64]))?;
            if !l.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("non-finite loss in batch {b}"),
                });
            }
            sgd.step(
                &mut model.params,
                &grads,
                1.0 / batch.len() as f64,
                config.learning_rate,
                config.momentum,
            )
            .map_err(|e| match e {
                Error::Divergence { message, .. } => Error::Divergence { epoch, message },
                other => other,
            })?;
            loss += l;
            correct += c;
        }
        let scorer = SiameseScorer::new(model.clone());
        let validation_accuracy =
            super::evaluate(&scorer, &bundle.validation, super::DECISION_THRESHOLD)?;
        let n = bundle.train.len() as f64;
        let stats = EpochStats {
            train_loss: loss / n,
            train_accuracy: correct as f64 / n,
            validation_accuracy,
        };
        log::debug!(
            "epoch {epoch}: loss {:.4} train acc {:.4} validation acc {:.4}",
            stats.train_loss,
            stats.train_accuracy,
            stats.validation_accuracy
        );
        let flow = progress(epoch, &stats);
        if best
            .as_ref()
            .is_none_or(|(_, acc, _)| validation_accuracy > *acc)
        {
            best = Some((epoch, validation_accuracy, model.params.clone()));
        }
        epochs.push(stats);
        if flow.is_break() {
            break;
        }
    }
    let (best_epoch, best_validation_accuracy, params) = best.expect("at least one epoch ran");
    model.params = params;
    Ok((
        model,
        TrainReport {
            epochs,
            best_epoch,
            best_validation_accuracy,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BundleMetadata, PairOptions, SplitPlan};
    use crate::nn::{reduced_chain, Architecture};
    use crate::subword::{CanvasSpec, SubwordAnnotation, SubwordImage};
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn bar_image(form: usize, jitter: usize) -> Arc<SubwordImage> {
        let (h, w) = (23, 19);
        let mut px = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let on = if form.is_multiple_of(2) {
                    (c + jitter) % 6 < 2
                } else {
                    (r + jitter) % 6 < 2
                };
                px[r * w + c] = if on { 1.0 } else { 0.0 };
            }
        }
        Arc::new(SubwordImage::new(h, w, px).unwrap())
    }

    fn pair(i: usize, same: bool) -> PairSample {
        let fa = i % 2;
        let fb = if same { fa } else { 1 - fa };
        PairSample {
            left: SubwordAnnotation::new("a", 0, 0, i as u32, fa.to_string())
                .with_image(bar_image(fa, i % 3)),
            right: SubwordAnnotation::new("b", 0, 0, i as u32, fb.to_string())
                .with_image(bar_image(fb, (i + 1) % 3)),
            label: same,
        }
    }

    fn bundle(n: usize) -> DatasetBundle {
        let train: Vec<_> = (0..n).map(|i| pair(i, i % 2 == 0)).collect();
        let validation: Vec<_> = (0..6).map(|i| pair(i + 100, i % 2 == 0)).collect();
        let plan = SplitPlan {
            heldout: ["x".into(), "y".into()],
            training: vec![],
            seed: 0,
        };
        let metadata = BundleMetadata {
            plan: plan.clone(),
            options: PairOptions::default(),
            train_size: n,
            train_true: n / 2,
            validation_size: 6,
            test_size: 0,
            forms_used: 2,
            forms_capped: 0,
            share_shortfalls: 0,
            manuscript_share: BTreeMap::new(),
        };
        DatasetBundle {
            train,
            validation,
            test: vec![],
            plan,
            metadata,
        }
    }

    fn model(seed: u64) -> SiameseModel {
        let arch = Architecture::new(
            reduced_chain(),
            CanvasSpec::new(23, 19).unwrap(),
            1.0 / 16.0,
        )
        .unwrap();
        SiameseModel::init(
            arch,
            &TrainConfig {
                fan_in_init: true,
                seed,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn rejects_zero_epochs() {
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(
            train(model(0), &bundle(4), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn report_shape_and_best_epoch() {
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 4,
            fan_in_init: true,
            seed: 3,
            ..Default::default()
        };
        let (_, report) = train(model(3), &bundle(8), &cfg).unwrap();
        assert_eq!(report.epochs.len(), 4);
        let accs: Vec<f64> = report
            .epochs
            .iter()
            .map(|e| e.validation_accuracy)
            .collect();
        let max = accs.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(
            report.best_epoch,
            accs.iter().position(|&a| a == max).unwrap()
        );
        assert_eq!(report.best_validation_accuracy, max);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 3,
            fan_in_init: true,
            seed: 5,
            ..Default::default()
        };
        let (a, ra) = train(model(5), &bundle(6), &cfg).unwrap();
        let (b, rb) = train(model(5), &bundle(6), &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn divergence_reports_epoch() {
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            learning_rate: 1e300,
            fan_in_init: true,
            ..Default::default()
        };
        match train(model(1), &bundle(6), &cfg) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|r| r.1)),
        }
    }
}
