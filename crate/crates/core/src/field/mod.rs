//! The pixel-aligned implicit field: one hourglass encoder per view, orthographic
//! projection of query points into every view's feature map, concatenation of the
//! four sampled feature vectors with the world coordinate, and an MLP head that
//! predicts the mapped signed distance value, a surface normal and an edge score.
//!
//! Everything is generic over the float type so the same code runs in `f64` for
//! gradient checks and in `f32` for training and inference.

mod checkpoint;
mod encoder;
mod mlp;
mod ops;
mod pifu;
mod train;

pub use checkpoint::{load_weights, read_checkpoint, save_weights, Checkpoint};
pub use encoder::{encode, encoder_output_size};
pub use ops::Tensor;
pub use pifu::{FieldOutput, PixelAlignedField};
pub use train::{
    evaluate_loss, grad_check, loss, train, write_loss_csv, GradCheck, LossParts, LossRecord, Optimizer, TrainConfig,
    TrainItem, TrainOutcome, TrainingState,
};

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blueprint::BlueprintError;
use crate::geometry::ViewKind;
use crate::sampling::SamplingError;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("{view} view is {width}x{height} px; the encoder needs at least {min} px per side")]
    InputTooSmall { view: String, width: usize, height: usize, min: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("the training dataset is empty")]
    EmptyDataset,
    #[error("not a weights file (bad magic)")]
    BadMagic,
    #[error("unsupported weights file version {0}")]
    UnsupportedVersion(u32),
    #[error("weights file truncated or malformed: {0}")]
    Malformed(String),
    #[error("checkpoint configuration {found} does not match the expected {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
}

/// Hourglass encoder shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Number of chained hourglass modules.
    pub stacks: usize,
    /// Stride-2 convolutions applied before the first hourglass.
    pub initial_downsample_steps: usize,
    /// Pool/process levels inside each hourglass.
    pub internal_downsample_steps: usize,
    /// Channels of every internal and output feature map.
    pub feature_depth: usize,
    /// Largest view dimension the network is trained on.
    pub max_input_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { stacks: 2, initial_downsample_steps: 1, internal_downsample_steps: 5, feature_depth: 128, max_input_dim: 512 }
    }
}

impl EncoderConfig {
    /// The 256-pixel variant with the deeper feature maps.
    pub fn large_features() -> Self {
        Self { feature_depth: 256, max_input_dim: 256, ..Self::default() }
    }

    /// Small configuration for CPU experiments and the test suite.
    pub fn toy() -> Self {
        Self { stacks: 1, feature_depth: 8, max_input_dim: 64, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let counts = [
            ("stacks", self.stacks),
            ("initial_downsample_steps", self.initial_downsample_steps),
            ("internal_downsample_steps", self.internal_downsample_steps),
            ("feature_depth", self.feature_depth),
            ("max_input_dim", self.max_input_dim),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(FieldError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.initial_downsample_steps > 16 || self.internal_downsample_steps > 16 {
            return Err(FieldError::Config("downsampling steps must be at most 16".into()));
        }
        Ok(())
    }

    /// Total stride of the initial reduction.
    pub fn feature_stride(&self) -> usize {
        1 << self.initial_downsample_steps
    }

    /// Smallest accepted input side: every initial reduction must halve at least
    /// two pixels.
    pub fn min_input_dim(&self) -> usize {
        self.feature_stride()
    }

    /// Feature values produced for a `width × height` input.
    pub fn feature_elements(&self, width: usize, height: usize) -> usize {
        let (w, h) = encoder_output_size(self, width, height);
        self.feature_depth * w * h
    }
}

/// Full network architecture.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub encoder: EncoderConfig,
    /// Hidden layer widths of the MLP head.
    pub mlp_hidden: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { encoder: EncoderConfig::default(), mlp_hidden: vec![256, 128, 64] }
    }
}

impl NetworkConfig {
    pub fn toy() -> Self {
        Self { encoder: EncoderConfig::toy(), mlp_hidden: vec![64, 64, 32] }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        self.encoder.validate()?;
        if self.mlp_hidden.contains(&0) {
            return Err(FieldError::Config("MLP layer widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Length of the vector entering the MLP: four feature slices plus `xyz`.
    pub fn mlp_input_len(&self) -> usize {
        4 * self.encoder.feature_depth + 3
    }
}

/// Outputs of the MLP head: value logit, raw normal (3) and edge.
pub const MLP_OUTPUTS: usize = 5;

/// A named parameter tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvLayer {
    pub weight: usize,
    pub bias: usize,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct DenseLayer {
    pub weight: usize,
    pub bias: usize,
    pub nin: usize,
    pub nout: usize,
}

#[derive(Default)]
struct LayoutBuilder {
    specs: Vec<TensorSpec>,
    len: usize,
}

impl LayoutBuilder {
    fn tensor(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.len;
        let spec = TensorSpec { name, shape, offset };
        self.len += spec.len();
        self.specs.push(spec);
        offset
    }

    fn conv(&mut self, prefix: &str, cin: usize, cout: usize, stride: usize) -> ConvLayer {
        let weight = self.tensor(format!("{prefix}.weight"), vec![cout, cin, 3, 3]);
        let bias = self.tensor(format!("{prefix}.bias"), vec![cout]);
        ConvLayer { weight, bias, cin, cout, stride }
    }

    // Mirrors the traversal order of the hourglass forward pass.
    fn hourglass(&mut self, prefix: &str, level: usize, depth: usize, c: usize, out: &mut Vec<ConvLayer>) {
        let p = format!("{prefix}.level{level}");
        out.push(self.conv(&format!("{p}.skip"), c, c, 1));
        out.push(self.conv(&format!("{p}.pre"), c, c, 1));
        if level + 1 < depth {
            self.hourglass(prefix, level + 1, depth, c, out);
        } else {
            out.push(self.conv(&format!("{p}.inner"), c, c, 1));
        }
        out.push(self.conv(&format!("{p}.post"), c, c, 1));
    }
}

/// Network weights in one flat vector with a named layout. Parameters are declared
/// view by view (front, back, side, top encoders), then the MLP layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    config: NetworkConfig,
    layout: Vec<TensorSpec>,
    pub(crate) encoders: [Vec<ConvLayer>; 4],
    pub(crate) mlp: Vec<DenseLayer>,
    pub params: Vec<T>,
}

impl<T: Float> Network<T> {
    /// All-zero network of the given architecture.
    pub fn zeros(config: &NetworkConfig) -> Result<Self, FieldError> {
        config.validate()?;
        let e = &config.encoder;
        let c = e.feature_depth;
        let mut b = LayoutBuilder::default();
        let encoders = ViewKind::ALL.map(|kind| {
            let name = kind.name();
            let mut convs = Vec::new();
            for i in 0..e.initial_downsample_steps {
                convs.push(b.conv(&format!("{name}.init{i}"), if i == 0 { 1 } else { c }, c, 2));
            }
            for s in 0..e.stacks {
                b.hourglass(&format!("{name}.stack{s}"), 0, e.internal_downsample_steps, c, &mut convs);
            }
            convs
        });
        let mut widths = vec![config.mlp_input_len()];
        widths.extend(&config.mlp_hidden);
        widths.push(MLP_OUTPUTS);
        let mlp = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let weight = b.tensor(format!("mlp.{l}.weight"), vec![w[1], w[0]]);
                let bias = b.tensor(format!("mlp.{l}.bias"), vec![w[1]]);
                DenseLayer { weight, bias, nin: w[0], nout: w[1] }
            })
            .collect();
        Ok(Self { config: config.clone(), layout: b.specs, encoders, mlp, params: vec![T::zero(); b.len] })
    }

    /// Seeded initialization: uniform fan-in scaled convolutions (halved inside
    /// residual blocks), Glorot-uniform dense layers, zero biases.
    pub fn new(config: &NetworkConfig, seed: u64) -> Result<Self, FieldError> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = config.encoder.initial_downsample_steps;
        for convs in &net.encoders {
            for (i, l) in convs.iter().enumerate() {
                let gain = if i < init { 1.0 } else { 0.5 };
                let a = gain * (3.0 / (l.cin * 9) as f64).sqrt();
                for p in &mut net.params[l.weight..l.weight + l.cout * l.cin * 9] {
                    *p = ops::c(rng.random_range(-a..=a));
                }
            }
        }
        for l in &net.mlp {
            let a = (6.0 / (l.nin + l.nout) as f64).sqrt();
            for p in &mut net.params[l.weight..l.weight + l.nin * l.nout] {
                *p = ops::c(rng.random_range(-a..=a));
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layout(&self) -> &[TensorSpec] {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        let s = self.layout.iter().find(|s| s.name == name)?;
        Some(&self.params[s.offset..s.offset + s.len()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [T]> {
        let s = self.layout.iter().find(|s| s.name == name)?;
        let range = s.offset..s.offset + s.len();
        Some(&mut self.params[range])
    }

    /// Same weights in another float type.
    pub fn cast<U: Float>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            layout: self.layout.clone(),
            encoders: self.encoders.clone(),
            mlp: self.mlp.clone(),
            params: self.params.iter().map(|&p| ops::c(p.to_f64().expect("finite"))).collect(),
        }
    }
}

/// Parameter count of an architecture without allocating it.
pub fn param_count(config: &NetworkConfig) -> Result<usize, FieldError> {
    Network::<f32>::zeros(config).map(|n| n.param_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Closed-form count: every 3×3 conv has cout·(cin·9 + 1) parameters; each
    // hourglass has three convs per level plus one at the bottom.
    fn count_oracle(cfg: &NetworkConfig) -> usize {
        let e = &cfg.encoder;
        let c = e.feature_depth;
        let conv = |cin: usize| c * (cin * 9 + 1);
        let per_view = conv(1)
            + (e.initial_downsample_steps - 1) * conv(c)
            + e.stacks * (3 * e.internal_downsample_steps + 1) * conv(c);
        let mut widths = vec![4 * c + 3];
        widths.extend(&cfg.mlp_hidden);
        widths.push(5);
        4 * per_view + widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum::<usize>()
    }

    #[test]
    fn parameter_counts_match_closed_form() {
        for cfg in [
            NetworkConfig::toy(),
            NetworkConfig::default(),
            NetworkConfig { encoder: EncoderConfig { initial_downsample_steps: 3, stacks: 3, ..EncoderConfig::toy() }, mlp_hidden: vec![7] },
        ] {
            assert_eq!(param_count(&cfg).unwrap(), count_oracle(&cfg), "{cfg:?}");
        }
        assert_eq!(param_count(&NetworkConfig::toy()).unwrap(), 46_405);
    }

    #[test]
    fn layout_is_contiguous_and_named() {
        let net = Network::<f64>::new(&NetworkConfig::toy(), 1).unwrap();
        let mut next = 0;
        for s in net.layout() {
            assert_eq!(s.offset, next);
            next += s.len();
        }
        assert_eq!(next, net.param_count());
        assert_eq!(net.layout()[0].name, "front.init0.weight");
        assert_eq!(net.tensor("top.stack0.level4.inner.bias").unwrap().len(), 8);
        assert_eq!(net.tensor("mlp.0.weight").unwrap().len(), 64 * 35);
        assert!(net.tensor("mlp.0.bias").unwrap().iter().all(|&b| b == 0.0));
        assert_eq!(net.layout().last().unwrap().name, "mlp.3.bias");
    }

    #[test]
    fn initialization_is_seeded() {
        let a = Network::<f32>::new(&NetworkConfig::toy(), 3).unwrap();
        assert_eq!(a, Network::new(&NetworkConfig::toy(), 3).unwrap());
        assert_ne!(a, Network::new(&NetworkConfig::toy(), 4).unwrap());
        assert_eq!(a.cast::<f64>().cast::<f32>(), a);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = NetworkConfig { encoder: EncoderConfig { stacks: 0, ..EncoderConfig::toy() }, ..NetworkConfig::toy() };
        assert!(matches!(Network::<f32>::zeros(&bad), Err(FieldError::Config(_))));
        let bad = NetworkConfig { mlp_hidden: vec![4, 0], ..NetworkConfig::toy() };
        assert!(Network::<f32>::zeros(&bad).is_err());
    }

    #[test]
    fn dynamic_sizes_are_cheaper_than_padding() {
        let cfg = EncoderConfig::default();
        let dynamic: usize = [(512, 200), (512, 180), (150, 200), (150, 200)].iter().map(|&(w, h)| cfg.feature_elements(w, h)).sum();
        let padded = 4 * cfg.feature_elements(512, 512);
        assert_eq!(dynamic, 128 * (256 * 100 + 256 * 90 + 2 * 75 * 100));
        assert!((dynamic as f64) < 0.45 * padded as f64);
    }
}
