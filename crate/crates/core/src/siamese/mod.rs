//! The weight-tied twin network with an L1 + sigmoid head, and the scorer
//! boundary consumed by alignment and evaluation.

mod checkpoint;
mod scorer;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    self, backward, forward, init_params_with, sigmoid, Architecture, InitScheme, LayerParams,
    Mode, ModelParams, Tensors, TrainConfig,
};
use crate::seed;
use crate::subword::SubwordImage;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, sidecar_path,
    CHECKPOINT_MAGIC,
};
pub use scorer::{
    evaluate, oracle_score, OracleScorer, ScorerSpec, SiameseScorer, SimilarityScorer,
    DECISION_THRESHOLD,
};
pub use train::{batch_gradient, train, train_with_progress, EpochStats, TrainReport};

/// Twin parameters plus the head. There is exactly one twin parameter set;
/// both inputs run through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiameseParams {
    pub twin: ModelParams,
    /// One weight per embedding coordinate, and a single bias.
    pub head: LayerParams,
}

impl Tensors for SiameseParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.twin.tensors();
        t.push(&self.head.weights);
        t.push(&self.head.bias);
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.twin.tensors_mut();
        t.push(&mut self.head.weights);
        t.push(&mut self.head.bias);
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub arch: Architecture,
    pub params: SiameseParams,
}

/// Result of a forward/backward pass on one labelled pair.
#[derive(Debug, Clone)]
pub struct PairGradient {
    pub loss: f64,
    pub probability: f64,
    pub grads: SiameseParams,
}

impl SiameseModel {
    /// Zero-mean normal weights for the twin and the head, zero biases.
    pub fn init(arch: Architecture, config: &TrainConfig) -> Result<Self> {
        let scheme = if config.fan_in_init {
            InitScheme::FanIn
        } else {
            InitScheme::Normal {
                stddev: config.init_stddev,
            }
        };
        let mut rng = seed::rng_for(config.seed, "init");
        let twin = init_params_with(&arch, scheme, &mut rng)?;
        let emb = arch.embedding_len();
        let mut head = LayerParams::zeros(emb, 1);
        nn::fill_normal(&mut head.weights, scheme.stddev_for(emb), &mut rng)
            .map_err(Error::InvalidConfig)?;
        Ok(Self {
            arch,
            params: SiameseParams { twin, head },
        })
    }

    pub fn embedding_len(&self) -> usize {
        self.arch.embedding_len()
    }

    /// Eval-mode twin embedding.
    pub fn embed(&self, img: &SubwordImage) -> Result<Vec<f64>> {
        Ok(forward(&self.params.twin, &self.arch, img, Mode::Eval)?.0)
    }

    /// `sigmoid(bias + sum_i w_i |a_i - b_i|)`.
    pub fn head_probability(&self, a: &[f64], b: &[f64]) -> f64 {
        sigmoid(self.head_logit(a, b))
    }

    fn head_logit(&self, a: &[f64], b: &[f64]) -> f64 {
        let h = &self.params.head;
        h.bias[0]
            + h.weights
                .iter()
                .zip(a.iter().zip(b))
                .map(|(w, (x, y))| w * (x - y).abs())
                .sum::<f64>()
    }

    pub fn score(&self, left: &SubwordImage, right: &SubwordImage) -> Result<f64> {
        let a = self.embed(left)?;
        let b = self.embed(right)?;
        Ok(self.head_probability(&a, &b))
    }

    /// Loss and parameter gradients for one pair in training mode. Each
    /// branch gets its own dropout stream.
    pub fn pair_gradient(
        &self,
        left: &SubwordImage,
        right: &SubwordImage,
        label: bool,
        dropout_seed: u64,
    ) -> Result<PairGradient> {
        let seeds = [
            seed::derive_n(dropout_seed, &[0]),
            seed::derive_n(dropout_seed, &[1]),
        ];
        let (a, ta) = forward(
            &self.params.twin,
            &self.arch,
            left,
            Mode::Train {
                dropout_seed: seeds[0],
            },
        )?;
        let (b, tb) = forward(
            &self.params.twin,
            &self.arch,
            right,
            Mode::Train {
                dropout_seed: seeds[1],
            },
        )?;
        let probability = self.head_probability(&a, &b);
        let loss = nn::bce_loss(probability, label);
        // d loss / d logit of the sigmoid + cross-entropy pair
        let dz = probability - if label { 1.0 } else { 0.0 };

        let w = &self.params.head.weights;
        let mut head = LayerParams::zeros(w.len(), 1);
        head.bias[0] = dz;
        let mut da = vec![0.0; a.len()];
        for i in 0..a.len() {
            let diff = a[i] - b[i];
            head.weights[i] = dz * diff.abs();
            da[i] = dz * w[i] * sign(diff);
        }
        let db: Vec<f64> = da.iter().map(|g| -g).collect();
        let mut twin = backward(&self.params.twin, &self.arch, &ta, &da)?;
        let twin_b = backward(&self.params.twin, &self.arch, &tb, &db)?;
        add_into(&mut twin, &twin_b);
        Ok(PairGradient {
            loss,
            probability,
            grads: SiameseParams { twin, head },
        })
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn add_into<P: Tensors>(acc: &mut P, other: &P) {
    for (a, b) in acc.tensors_mut().into_iter().zip(other.tensors()) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::reduced_chain;
    use crate::subword::CanvasSpec;

    fn model(seed: u64) -> SiameseModel {
        let arch =
            Architecture::new(reduced_chain(), CanvasSpec::new(23, 19).unwrap(), 0.25).unwrap();
        SiameseModel::init(
            arch,
            &TrainConfig {
                init_stddev: 0.2,
                seed,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn image(k: usize) -> SubwordImage {
        SubwordImage::new(
            23,
            19,
            (0..23 * 19)
                .map(|i| ((i * (k + 3)) % 17) as f64 / 16.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_inputs_score_sigmoid_of_bias() {
        let m = model(1);
        assert_eq!(m.score(&image(1), &image(1)).unwrap(), 0.5);
        let mut m2 = m.clone();
        m2.params.head.bias[0] = 0.7;
        assert!((m2.score(&image(2), &image(2)).unwrap() - sigmoid(0.7)).abs() < 1e-12);
    }

    #[test]
    fn score_is_symmetric() {
        let m = model(2);
        let (a, b) = (image(1), image(4));
        assert_eq!(
            m.score(&a, &b).unwrap().to_bits(),
            m.score(&b, &a).unwrap().to_bits()
        );
    }

    #[test]
    fn head_matches_external_computation() {
        let m = model(3);
        let (a, b) = (image(2), image(5));
        let (ea, eb) = (m.embed(&a).unwrap(), m.embed(&b).unwrap());
        let z: f64 = m.params.head.bias[0]
            + ea.iter()
                .zip(&eb)
                .zip(&m.params.head.weights)
                .map(|((x, y), w)| w * (x - y).abs())
                .sum::<f64>();
        let want = 1.0 / (1.0 + (-z).exp());
        assert!((m.score(&a, &b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn tensors_cover_head() {
        let m = model(4);
        let n: usize = m.params.tensors().iter().map(|t| t.len()).sum();
        assert_eq!(n, m.params.twin.count() + m.embedding_len() + 1);
    }
}
