use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use super::SiameseModel;
use crate::dataset::PairSample;
use crate::error::{Error, Result};
use crate::seed;
use crate::subword::{SubwordAnnotation, TokenKey};

/// Scores at or above this count as "same text".
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Similarity in `[0, 1]` between two subword occurrences.
pub trait SimilarityScorer: Send + Sync {
    fn score(&self, left: &SubwordAnnotation, right: &SubwordAnnotation) -> Result<f64>;

    fn describe(&self) -> String;
}

impl<S: SimilarityScorer + ?Sized> SimilarityScorer for Box<S> {
    fn score(&self, left: &SubwordAnnotation, right: &SubwordAnnotation) -> Result<f64> {
        (**self).score(left, right)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<S: SimilarityScorer + ?Sized> SimilarityScorer for Arc<S> {
    fn score(&self, left: &SubwordAnnotation, right: &SubwordAnnotation) -> Result<f64> {
        (**self).score(left, right)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// A frozen siamese model. Embeddings are cached per token so each image
/// runs through the twin once.
pub struct SiameseScorer {
    model: SiameseModel,
    label: String,
    cache: Mutex<EmbeddingCache>,
}

type EmbeddingCache = HashMap<(TokenKey, String), Arc<Vec<f64>>>;

impl SiameseScorer {
    pub fn new(model: SiameseModel) -> Self {
        Self {
            model,
            label: "siamese".into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_checkpoint(path: &Path) -> Result<Self> {
        let mut s = Self::new(super::load_checkpoint(path)?);
        s.label = format!("siamese:{}", path.display());
        Ok(s)
    }

    pub fn model(&self) -> &SiameseModel {
        &self.model
    }

    fn embedding(&self, t: &SubwordAnnotation) -> Result<Arc<Vec<f64>>> {
        let key = (t.key.clone(), t.form_id.clone());
        if let Some(e) = self
            .cache
            .lock()
            .expect("embedding cache poisoned")
            .get(&key)
        {
            return Ok(e.clone());
        }
        let e = Arc::new(self.model.embed(t.image()?)?);
        self.cache
            .lock()
            .expect("embedding cache poisoned")
            .insert(key, e.clone());
        Ok(e)
    }
}

impl SimilarityScorer for SiameseScorer {
    fn score(&self, left: &SubwordAnnotation, right: &SubwordAnnotation) -> Result<f64> {
        let a = self.embedding(left)?;
        let b = self.embedding(right)?;
        Ok(self.model.head_probability(&a, &b))
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Ground-truth scorer: 1 when forms agree, 0 otherwise, flipped with a
/// fixed probability. Each unordered token pair has its own deterministic
/// flip, so the scorer is symmetric and repeatable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScorer {
    pub flip_probability: f64,
    pub seed: u64,
}

impl OracleScorer {
    pub fn new(flip_probability: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip_probability) {
            return Err(Error::InvalidConfig(format!(
                "flip probability {flip_probability} outside [0, 1]"
            )));
        }
        Ok(Self {
            flip_probability,
            seed,
        })
    }

    pub fn exact() -> Self {
        Self {
            flip_probability: 0.0,
            seed: 0,
        }
    }
}

/// Oracle decision for one pair; see [`OracleScorer`].
pub fn oracle_score(
    left: &SubwordAnnotation,
    right: &SubwordAnnotation,
    flip_probability: f64,
    seed: u64,
) -> f64 {
    let base = left.form_id == right.form_id;
    if flip_probability <= 0.0 {
        return if base { 1.0 } else { 0.0 };
    }
    let (ka, kb) = (token_hash(left), token_hash(right));
    let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
    let u = seed::unit_from_hash(seed::derive_n(seed, &[lo, hi]));
    let flipped = base ^ (u < flip_probability);
    if flipped {
        1.0
    } else {
        0.0
    }
}

fn token_hash(t: &SubwordAnnotation) -> u64 {
    seed::fnv1a(format!("{}\u{1f}{}", t.key, t.form_id).as_bytes())
}

impl SimilarityScorer for OracleScorer {
    fn score(&self, left: &SubwordAnnotation, right: &SubwordAnnotation) -> Result<f64> {
        Ok(oracle_score(left, right, self.flip_probability, self.seed))
    }

    fn describe(&self) -> String {
        format!("oracle:{}", self.flip_probability)
    }
}

/// `siamese:<checkpoint>` or `oracle:<flip_probability>`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    Siamese(PathBuf),
    Oracle(f64),
}

impl FromStr for ScorerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| {
            Error::InvalidConfig(format!(
                "scorer `{s}` is not `siamese:<path>` or `oracle:<p>`"
            ))
        })?;
        match kind.trim() {
            "siamese" if !arg.is_empty() => Ok(ScorerSpec::Siamese(PathBuf::from(arg))),
            "oracle" => {
                let p: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|e| Error::InvalidConfig(format!("scorer `{s}`: {e}")))?;
                OracleScorer::new(p, 0)?;
                Ok(ScorerSpec::Oracle(p))
            }
            _ => Err(Error::InvalidConfig(format!("unknown scorer `{s}`"))),
        }
    }
}

impl ScorerSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn SimilarityScorer>> {
        Ok(match self {
            ScorerSpec::Siamese(path) => Box::new(SiameseScorer::from_checkpoint(path)?),
            ScorerSpec::Oracle(p) => Box::new(OracleScorer::new(*p, seed)?),
        })
    }
}

/// Fraction of pairs where `score >= threshold` agrees with the label.
pub fn evaluate<S: SimilarityScorer + ?Sized>(
    scorer: &S,
    pairs: &[PairSample],
    threshold: f64,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptySet("accuracy"));
    }
    let mut correct = 0usize;
    for p in pairs {
        let s = scorer.score(&p.left, &p.right)?;
        if (s >= threshold) == p.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);

    impl SimilarityScorer for Constant {
        fn score(&self, _: &SubwordAnnotation, _: &SubwordAnnotation) -> Result<f64> {
            Ok(self.0)
        }

        fn describe(&self) -> String {
            "constant".into()
        }
    }

    fn tok(pos: u32, form: &str) -> SubwordAnnotation {
        SubwordAnnotation::new("m", 0, 0, pos, form)
    }

    fn pairs() -> Vec<PairSample> {
        (0..10)
            .map(|i| PairSample {
                left: tok(i, "a"),
                right: tok(i + 100, if i < 3 { "a" } else { "b" }),
                label: i < 3,
            })
            .collect()
    }

    #[test]
    fn oracle_basics() {
        let (a, b, c) = (tok(0, "x"), tok(1, "x"), tok(2, "y"));
        assert_eq!(oracle_score(&a, &b, 0.0, 1), 1.0);
        assert_eq!(oracle_score(&a, &c, 0.0, 1), 0.0);
        assert_eq!(oracle_score(&a, &b, 1.0, 1), 0.0);
        assert_eq!(oracle_score(&a, &c, 1.0, 1), 1.0);
        for i in 0..50 {
            let (p, q) = (tok(i, "x"), tok(i + 1, if i % 2 == 0 { "x" } else { "z" }));
            assert_eq!(oracle_score(&p, &q, 0.3, 9), oracle_score(&q, &p, 0.3, 9));
        }
    }

    #[test]
    fn oracle_flip_rate() {
        let n = 20_000u32;
        let flips = (0..n)
            .filter(|&i| oracle_score(&tok(i, "a"), &tok(i + n, "a"), 0.05, 3) == 0.0)
            .count();
        let sd = (n as f64 * 0.05 * 0.95).sqrt();
        assert!((flips as f64 - n as f64 * 0.05).abs() < 4.0 * sd, "{flips}");
    }

    #[test]
    fn evaluate_cases() {
        let ps = pairs();
        assert_eq!(evaluate(&OracleScorer::exact(), &ps, 0.5).unwrap(), 1.0);
        assert!((evaluate(&Constant(0.5), &ps, 0.5).unwrap() - 0.3).abs() < 1e-12);
        assert!(matches!(
            evaluate(&Constant(0.5), &[], 0.5),
            Err(Error::EmptySet(_))
        ));
        let balanced: Vec<_> = (0..10)
            .map(|i| PairSample {
                left: tok(i, "a"),
                right: tok(i, if i % 2 == 0 { "a" } else { "b" }),
                label: i % 2 == 0,
            })
            .collect();
        assert_eq!(evaluate(&Constant(1.0), &balanced, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn scorer_spec_parsing() {
        assert_eq!(
            "oracle:0.05".parse::<ScorerSpec>().unwrap(),
            ScorerSpec::Oracle(0.05)
        );
        assert_eq!(
            "siamese:m.ckpt".parse::<ScorerSpec>().unwrap(),
            ScorerSpec::Siamese("m.ckpt".into())
        );
        assert!("oracle:2".parse::<ScorerSpec>().is_err());
        assert!("oracle".parse::<ScorerSpec>().is_err());
        assert!("cnn:x".parse::<ScorerSpec>().is_err());
    }
}
