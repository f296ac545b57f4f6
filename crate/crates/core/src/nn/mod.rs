//! A small CPU network engine: valid stride-1 convolutions, 2x2 max
//! pooling, dense layers, ReLU, inverted dropout, plus backpropagation.
//!
//! Tensors are flat `f64` buffers in channel-major order. Every convolution
//! and dense layer is followed by a ReLU.

mod kernels;
mod optim;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subword::{CanvasSpec, SubwordImage};

pub use kernels::{backward, forward, Mode, Tape};
pub use optim::{bce_loss, sigmoid, Sgd, Tensors, TrainConfig, BCE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    MaxPool,
    Dense,
    Dropout,
}

/// One entry of a layer chain. `filters` is the unscaled channel or unit
/// count; the architecture's channel multiplier is applied on top.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub filters: usize,
    pub kernel: (usize, usize),
    pub rate: f64,
}

impl LayerSpec {
    pub fn conv(filters: usize, kh: usize, kw: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            filters,
            kernel: (kh, kw),
            rate: 0.0,
        }
    }

    pub fn maxpool(size: usize) -> Self {
        Self {
            kind: LayerKind::MaxPool,
            filters: 0,
            kernel: (size, size),
            rate: 0.0,
        }
    }

    pub fn dense(units: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            filters: units,
            kernel: (1, 1),
            rate: 0.0,
        }
    }

    pub fn dropout(rate: f64) -> Self {
        Self {
            kind: LayerKind::Dropout,
            filters: 0,
            kernel: (1, 1),
            rate,
        }
    }

    fn validate(&self, idx: usize) -> Result<()> {
        let bad = |m: String| {
            Err(Error::IncompatibleGeometry {
                layer: layer_name(idx, self),
                message: m,
            })
        };
        if self.kernel.0 == 0 || self.kernel.1 == 0 {
            return bad("kernel dimensions must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.rate));
        }
        if matches!(self.kind, LayerKind::Conv | LayerKind::Dense) && self.filters == 0 {
            return bad("needs at least one filter".into());
        }
        Ok(())
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LayerKind::Conv => write!(
                f,
                "conv {} {}x{}",
                self.filters, self.kernel.0, self.kernel.1
            ),
            LayerKind::MaxPool => write!(f, "maxpool {}x{}", self.kernel.0, self.kernel.1),
            LayerKind::Dense => write!(f, "dense {}", self.filters),
            LayerKind::Dropout => write!(f, "dropout {}", self.rate),
        }
    }
}

fn layer_name(idx: usize, spec: &LayerSpec) -> String {
    format!("#{idx} ({spec})")
}

/// The twin architecture from the manuscript-alignment network: four conv
/// blocks whose middle layers interpolate between neighbours, then two
/// 4096-unit dense layers with dropout 0.1 between them.
pub fn full_chain() -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv(64, 5, 5),
        LayerSpec::maxpool(2),
        LayerSpec::conv(64, 4, 4),
        LayerSpec::conv(128, 4, 4),
        LayerSpec::maxpool(2),
        LayerSpec::conv(128, 3, 3),
        LayerSpec::conv(256, 3, 3),
        LayerSpec::maxpool(2),
        LayerSpec::conv(256, 2, 2),
        LayerSpec::conv(512, 2, 2),
        LayerSpec::maxpool(2),
        LayerSpec::dense(4096),
        LayerSpec::dropout(0.1),
        LayerSpec::dense(4096),
    ]
}

/// A short chain exercising every layer kind, small enough for finite
/// difference checks on tiny canvases such as 23x19.
pub fn reduced_chain() -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv(64, 5, 5),
        LayerSpec::maxpool(2),
        LayerSpec::conv(128, 3, 3),
        LayerSpec::maxpool(2),
        LayerSpec::dense(512),
        LayerSpec::dropout(0.1),
        LayerSpec::dense(512),
    ]
}

/// Channel-major activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.height == 1 && self.width == 1 {
            write!(f, "{}", self.channels)
        } else {
            write!(f, "{}@{}x{}", self.channels, self.height, self.width)
        }
    }
}

/// Scales a filter count by the channel multiplier, rounding up.
pub fn scaled_filters(filters: usize, multiplier: f64) -> usize {
    ((filters as f64 * multiplier) - 1e-9).ceil().max(1.0) as usize
}

/// A validated layer chain bound to a canvas and channel multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    specs: Vec<LayerSpec>,
    multiplier: f64,
    canvas: CanvasSpec,
    input: Shape,
    outputs: Vec<Shape>,
}

impl Architecture {
    pub fn new(specs: Vec<LayerSpec>, canvas: CanvasSpec, multiplier: f64) -> Result<Self> {
        if !(multiplier > 0.0 && multiplier <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "channel multiplier {multiplier} outside (0, 1]"
            )));
        }
        if specs.is_empty() {
            return Err(Error::InvalidConfig("empty layer chain".into()));
        }
        if !specs.iter().any(|s| s.kind == LayerKind::Dense) {
            return Err(Error::InvalidConfig(
                "chain needs a dense layer to produce an embedding".into(),
            ));
        }
        let input = Shape {
            channels: 1,
            height: canvas.height,
            width: canvas.width,
        };
        let mut outputs = Vec::with_capacity(specs.len());
        let mut cur = input;
        let mut flat = false;
        for (idx, spec) in specs.iter().enumerate() {
            spec.validate(idx)?;
            let fail = |m: String| Error::IncompatibleGeometry {
                layer: layer_name(idx, spec),
                message: m,
            };
            cur = match spec.kind {
                LayerKind::Conv => {
                    if flat {
                        return Err(fail("convolution after a dense layer".into()));
                    }
                    let (kh, kw) = spec.kernel;
                    if cur.height < kh || cur.width < kw {
                        return Err(fail(format!(
                            "kernel {kh}x{kw} larger than input {}x{}",
                            cur.height, cur.width
                        )));
                    }
                    Shape {
                        channels: scaled_filters(spec.filters, multiplier),
                        height: cur.height - kh + 1,
                        width: cur.width - kw + 1,
                    }
                }
                LayerKind::MaxPool => {
                    if flat {
                        return Err(fail("pooling after a dense layer".into()));
                    }
                    let (ph, pw) = spec.kernel;
                    let (h, w) = (cur.height / ph, cur.width / pw);
                    if h == 0 || w == 0 {
                        return Err(fail(format!(
                            "pool {ph}x{pw} on {}x{} leaves an empty map",
                            cur.height, cur.width
                        )));
                    }
                    Shape {
                        channels: cur.channels,
                        height: h,
                        width: w,
                    }
                }
                LayerKind::Dense => {
                    flat = true;
                    Shape {
                        channels: scaled_filters(spec.filters, multiplier),
                        height: 1,
                        width: 1,
                    }
                }
                LayerKind::Dropout => cur,
            };
            outputs.push(cur);
        }
        if specs.last().map(|s| s.kind) == Some(LayerKind::MaxPool) {
            return Err(Error::InvalidConfig(
                "chain must end in a dense or dropout layer".into(),
            ));
        }
        Ok(Self {
            specs,
            multiplier,
            canvas,
            input,
            outputs,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn canvas(&self) -> CanvasSpec {
        self.canvas
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shapes(&self) -> &[Shape] {
        &self.outputs
    }

    pub fn input_shape_of(&self, idx: usize) -> Shape {
        if idx == 0 {
            self.input
        } else {
            self.outputs[idx - 1]
        }
    }

    pub fn embedding_len(&self) -> usize {
        self.outputs.last().map_or(0, Shape::len)
    }

    /// Human-readable shape chain, e.g. `64@79x65 -> 64@39x32 -> ...`.
    /// The flatten step is shown before the first dense layer.
    pub fn shape_chain(&self) -> Vec<String> {
        let mut chain = Vec::new();
        for (idx, (spec, shape)) in self.specs.iter().zip(&self.outputs).enumerate() {
            if spec.kind == LayerKind::Dense {
                let prev = self.input_shape_of(idx);
                if prev.height > 1 || prev.width > 1 {
                    chain.push(prev.len().to_string());
                }
            }
            if spec.kind != LayerKind::Dropout {
                chain.push(shape.to_string());
            }
        }
        chain
    }

    /// Weight and bias lengths for a parameterised layer.
    fn param_lens(&self, idx: usize) -> Option<(usize, usize)> {
        let spec = &self.specs[idx];
        let input = self.input_shape_of(idx);
        let out = self.outputs[idx];
        match spec.kind {
            LayerKind::Conv => Some((
                out.channels * input.channels * spec.kernel.0 * spec.kernel.1,
                out.channels,
            )),
            LayerKind::Dense => Some((out.channels * input.len(), out.channels)),
            _ => None,
        }
    }

    pub fn check_image(&self, img: &SubwordImage) -> Result<()> {
        if img.height() != self.canvas.height || img.width() != self.canvas.width {
            return Err(Error::IncompatibleGeometry {
                layer: "input".into(),
                message: format!(
                    "expected {} image, got {}x{}",
                    self.canvas,
                    img.height(),
                    img.width()
                ),
            });
        }
        Ok(())
    }
}

/// Weights and biases of one layer; empty for pooling and dropout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(weights: usize, bias: usize) -> Self {
        Self {
            weights: vec![0.0; weights],
            bias: vec![0.0; bias],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty() && self.bias.is_empty()
    }
}

/// Per-layer parameters of one twin, aligned with the architecture's chain.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
}

impl ModelParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let layers = (0..arch.specs.len())
            .map(|i| {
                arch.param_lens(i)
                    .map_or_else(LayerParams::default, |(w, b)| LayerParams::zeros(w, b))
            })
            .collect();
        Self { layers }
    }

    pub fn count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        if self.layers.len() != arch.specs.len() {
            return Err(Error::Internal(format!(
                "parameter set has {} layers, architecture {}",
                self.layers.len(),
                arch.specs.len()
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let (w, b) = arch.param_lens(i).unwrap_or((0, 0));
            if l.weights.len() != w || l.bias.len() != b {
                return Err(Error::Internal(format!(
                    "layer {i}: parameter shape mismatch"
                )));
            }
        }
        Ok(())
    }
}

/// How initial weights are drawn. Both variants are zero-mean normals; the
/// fan-in variant scales the deviation per layer by `sqrt(2 / fan_in)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum InitScheme {
    Normal { stddev: f64 },
    FanIn,
}

impl InitScheme {
    pub fn stddev_for(&self, fan_in: usize) -> f64 {
        match *self {
            InitScheme::Normal { stddev } => stddev,
            InitScheme::FanIn => (2.0 / fan_in.max(1) as f64).sqrt(),
        }
    }
}

/// Draws weights from `Normal(0, stddev^2)` and zeroes every bias.
pub fn init_params(arch: &Architecture, stddev: f64, seed: u64) -> Result<ModelParams> {
    init_params_with(
        arch,
        InitScheme::Normal { stddev },
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

pub fn init_params_with(
    arch: &Architecture,
    scheme: InitScheme,
    rng: &mut ChaCha8Rng,
) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(arch);
    for (idx, layer) in params.layers.iter_mut().enumerate() {
        if layer.weights.is_empty() {
            continue;
        }
        let fan_in = layer.weights.len() / layer.bias.len().max(1);
        fill_normal(&mut layer.weights, scheme.stddev_for(fan_in), rng)
            .map_err(|m| Error::InvalidConfig(format!("layer {idx}: {m}")))?;
    }
    Ok(params)
}

pub(crate) fn fill_normal(
    buf: &mut [f64],
    stddev: f64,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(), String> {
    if !(stddev >= 0.0 && stddev.is_finite()) {
        return Err(format!("invalid standard deviation {stddev}"));
    }
    if stddev == 0.0 {
        buf.fill(0.0);
        return Ok(());
    }
    let dist = Normal::new(0.0, stddev).map_err(|e| e.to_string())?;
    for w in buf.iter_mut() {
        *w = dist.sample(rng);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_shape_chain_on_default_canvas() {
        let arch = Architecture::new(full_chain(), CanvasSpec::default(), 1.0).unwrap();
        let chain = arch.shape_chain().join(" -> ");
        assert_eq!(
            chain,
            "64@79x65 -> 64@39x32 -> 64@36x29 -> 128@33x26 -> 128@16x13 -> 128@14x11 -> \
             256@12x9 -> 256@6x4 -> 256@5x3 -> 512@4x2 -> 512@2x1 -> 1024 -> 4096 -> 4096"
        );
        assert_eq!(arch.embedding_len(), 4096);
    }

    #[test]
    fn multiplier_rounds_up() {
        assert_eq!(scaled_filters(64, 1.0 / 16.0), 4);
        assert_eq!(scaled_filters(4096, 1.0 / 8.0), 512);
        assert_eq!(scaled_filters(5, 0.5), 3);
        assert_eq!(scaled_filters(1, 0.01), 1);
    }

    #[test]
    fn geometry_errors_name_the_layer() {
        let small = CanvasSpec::new(23, 19).unwrap();
        let err = Architecture::new(full_chain(), small, 1.0 / 16.0).unwrap_err();
        match err {
            Error::IncompatibleGeometry { layer, .. } => assert!(layer.starts_with('#'), "{layer}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Architecture::new(reduced_chain(), small, 1.0 / 16.0).is_ok());
        assert!(Architecture::new(
            vec![LayerSpec::dense(4), LayerSpec::conv(2, 1, 1)],
            small,
            1.0
        )
        .is_err());
        assert!(Architecture::new(
            vec![LayerSpec::dense(4), LayerSpec::dropout(1.0)],
            small,
            1.0
        )
        .is_err());
        assert!(Architecture::new(reduced_chain(), small, 0.0).is_err());
    }

    #[test]
    fn init_is_seeded_and_zero_mean() {
        let arch =
            Architecture::new(reduced_chain(), CanvasSpec::new(23, 19).unwrap(), 0.25).unwrap();
        let a = init_params(&arch, 0.05, 3).unwrap();
        let b = init_params(&arch, 0.05, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&arch, 0.05, 4).unwrap());
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&x| x == 0.0)));
        let w: Vec<f64> = a
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().copied())
            .collect();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 4.0 * 0.05 / (w.len() as f64).sqrt());
        assert!((var.sqrt() - 0.05).abs() < 0.005);

        let z = init_params(&arch, 0.0, 9).unwrap();
        assert!(z.layers.iter().all(|l| l.weights.iter().all(|&x| x == 0.0)));
        assert_eq!(z.count(), a.count());
    }
}
