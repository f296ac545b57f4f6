//! Leave-two-out cross-validation over a manuscript corpus.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_bundle, enumerate_split_plans, DatasetBundle, ManuscriptCorpus, PairOptions, SplitPlan,
};
use crate::error::{Error, Result};
use crate::nn::{Architecture, TrainConfig};
use crate::seed;
use crate::siamese::{self, SiameseModel, SiameseScorer, SimilarityScorer, DECISION_THRESHOLD};

/// What a fitter hands back for one split.
pub struct Fitted {
    pub scorer: Box<dyn SimilarityScorer>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValRow {
    pub heldout_a: String,
    pub heldout_b: String,
    pub test_accuracy: f64,
    pub validation_accuracy: f64,
    pub train_size: usize,
    pub train_true: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub best_epoch: Option<usize>,
    pub split_seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub rows: Vec<CrossValRow>,
    pub mean_test_accuracy: f64,
    pub mean_validation_accuracy: f64,
}

impl CrossValReport {
    fn from_rows(rows: Vec<CrossValRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptySet("cross-validation rows"));
        }
        let n = rows.len() as f64;
        let mean_test_accuracy = rows.iter().map(|r| r.test_accuracy).sum::<f64>() / n;
        let mean_validation_accuracy = rows.iter().map(|r| r.validation_accuracy).sum::<f64>() / n;
        Ok(Self {
            rows,
            mean_test_accuracy,
            mean_validation_accuracy,
        })
    }

    /// One row per split plus a trailing `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "heldout_a,heldout_b,test_accuracy,validation_accuracy,train_size,train_true,validation_size,test_size,best_epoch,split_seed,seconds\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{},{},{},{},{:.3}",
                r.heldout_a,
                r.heldout_b,
                r.test_accuracy,
                r.validation_accuracy,
                r.train_size,
                r.train_true,
                r.validation_size,
                r.test_size,
                r.best_epoch.map_or(String::new(), |e| e.to_string()),
                r.split_seed,
                r.seconds
            );
        }
        let _ = writeln!(
            out,
            "mean,,{:.6},{:.6},,,,,,,",
            self.mean_test_accuracy, self.mean_validation_accuracy
        );
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// JSON summary carrying a fingerprint of `config`, so two reports can
    /// be checked for comparable settings.
    pub fn summary_json(&self, config: &serde_json::Value) -> Result<String> {
        let summary = serde_json::json!({
            "config": config,
            "config_fingerprint": fingerprint(config)?,
            "splits": self.rows.len(),
            "mean_test_accuracy": self.mean_test_accuracy,
            "mean_validation_accuracy": self.mean_validation_accuracy,
            "rows": self.rows,
        });
        Ok(serde_json::to_string_pretty(&summary)? + "\n")
    }
}

/// Stable hex digest of a JSON value.
pub fn fingerprint(config: &serde_json::Value) -> Result<String> {
    Ok(format!(
        "{:016x}",
        seed::fnv1a(serde_json::to_string(config)?.as_bytes())
    ))
}

/// Runs `fit` on every leave-two-out split and evaluates the returned
/// scorer on the split's validation and test sets. Up to `workers` splits
/// run at once; rows always come back in plan order.
pub fn run_cross_validation_with<F>(
    corpus: &ManuscriptCorpus,
    options: PairOptions,
    seed: u64,
    workers: usize,
    fit: F,
) -> Result<CrossValReport>
where
    F: Fn(&DatasetBundle) -> Result<Fitted> + Sync,
{
    let plans = enumerate_split_plans(corpus, seed)?;
    let run_one = |plan: &SplitPlan| -> Result<CrossValRow> {
        let started = Instant::now();
        let bundle = build_bundle(corpus, plan, options)?;
        let fitted = fit(&bundle)?;
        let validation_accuracy =
            siamese::evaluate(&fitted.scorer, &bundle.validation, DECISION_THRESHOLD)?;
        let test_accuracy = siamese::evaluate(&fitted.scorer, &bundle.test, DECISION_THRESHOLD)?;
        log::info!(
            "split {}: validation {validation_accuracy:.4}, test {test_accuracy:.4}",
            plan.label()
        );
        Ok(CrossValRow {
            heldout_a: plan.heldout[0].clone(),
            heldout_b: plan.heldout[1].clone(),
            test_accuracy,
            validation_accuracy,
            train_size: bundle.train.len(),
            train_true: bundle.metadata.train_true,
            validation_size: bundle.validation.len(),
            test_size: bundle.test.len(),
            best_epoch: fitted.best_epoch,
            split_seed: plan.seed,
            seconds: started.elapsed().as_secs_f64(),
        })
    };

    let workers = workers.clamp(1, plans.len());
    let rows = if workers == 1 {
        plans.iter().map(run_one).collect::<Result<Vec<_>>>()?
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<CrossValRow>>>> =
            Mutex::new((0..plans.len()).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= plans.len() {
                        break;
                    }
                    let row = run_one(&plans[i]);
                    slots.lock().expect("result slots poisoned")[i] = Some(row);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|r| r.unwrap_or_else(|| Err(Error::Internal("split did not run".into()))))
            .collect::<Result<Vec<_>>>()?
    };
    CrossValReport::from_rows(rows)
}

/// Cross-validation with a freshly initialized siamese model trained on
/// each split. Each split's training seed is derived from its plan seed.
pub fn run_cross_validation(
    corpus: &ManuscriptCorpus,
    arch: &Architecture,
    config: &TrainConfig,
    options: PairOptions,
    seed: u64,
    workers: usize,
) -> Result<CrossValReport> {
    config.validate()?;
    run_cross_validation_with(corpus, options, seed, workers, |bundle| {
        let cfg = TrainConfig {
            seed: seed::derive(bundle.plan.seed, "train"),
            ..config.clone()
        };
        let model = SiameseModel::init(arch.clone(), &cfg)?;
        let (best, report) = siamese::train(model, bundle, &cfg)?;
        Ok(Fitted {
            scorer: Box::new(SiameseScorer::new(best)),
            best_epoch: Some(report.best_epoch),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::siamese::OracleScorer;
    use crate::subword::{Document, TextLine};

    fn corpus(n: usize) -> ManuscriptCorpus {
        let docs = (0..n)
            .map(|m| {
                let id = format!("m{m}");
                let forms: Vec<String> = (0..12).map(|f| format!("f{}", (f + m) % 6)).collect();
                Document {
                    manuscript_id: id.clone(),
                    lines: vec![TextLine::from_forms(&id, 0, 0, &forms)],
                }
            })
            .collect();
        ManuscriptCorpus::new(docs).unwrap()
    }

    fn oracle(_: &DatasetBundle) -> Result<Fitted> {
        Ok(Fitted {
            scorer: Box::new(OracleScorer::exact()),
            best_epoch: None,
        })
    }

    #[test]
    fn three_manuscripts_three_rows() {
        let r =
            run_cross_validation_with(&corpus(3), PairOptions::default(), 1, 1, oracle).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r
            .rows
            .iter()
            .all(|row| row.test_accuracy == 1.0 && row.validation_accuracy == 1.0));
        assert_eq!(r.mean_test_accuracy, 1.0);
    }

    #[test]
    fn seven_manuscripts_and_workers_agree() {
        let one =
            run_cross_validation_with(&corpus(7), PairOptions::default(), 2, 1, oracle).unwrap();
        let many =
            run_cross_validation_with(&corpus(7), PairOptions::default(), 2, 3, oracle).unwrap();
        assert_eq!(one.rows.len(), 21);
        let strip = |r: &CrossValReport| {
            r.rows
                .iter()
                .map(|x| (x.heldout_a.clone(), x.heldout_b.clone(), x.test_size))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&one), strip(&many));
        let csv = one.to_csv();
        assert_eq!(csv.lines().count(), 23);
        assert!(csv.starts_with("heldout_a,heldout_b,test_accuracy,validation_accuracy"));
    }

    #[test]
    fn mean_is_arithmetic() {
        let row = |t: f64| CrossValRow {
            heldout_a: "a".into(),
            heldout_b: "b".into(),
            test_accuracy: t,
            validation_accuracy: 1.0,
            train_size: 1,
            train_true: 1,
            validation_size: 1,
            test_size: 1,
            best_epoch: None,
            split_seed: 0,
            seconds: 0.0,
        };
        let r = CrossValReport::from_rows(vec![row(0.5), row(1.0), row(0.75)]).unwrap();
        assert!((r.mean_test_accuracy - 0.75).abs() < 1e-15);
        let json = r.summary_json(&serde_json::json!({"epochs": 3})).unwrap();
        assert!(json.contains("config_fingerprint"));
    }

    #[test]
    fn too_few_manuscripts() {
        assert!(matches!(
            run_cross_validation_with(&corpus(2), PairOptions::default(), 0, 1, oracle),
            Err(Error::InsufficientManuscripts(2))
        ));
    }
}
