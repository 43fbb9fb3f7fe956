//! Parameterized layers: plain and transposed convolutions, the
//! depthwise-separable convolution, contrast channel attention and the
//! pixel-shuffle reconstruction head.
//!
//! Layers only hold [`ParamId`]s. Tensors live in a [`ParamStore`] in
//! construction order, which is also the order they are written to disk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamId};
use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

/// Negative-side slope used by every leaky ReLU in the network.
pub const LEAKY_SLOPE: f64 = 0.05;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Collects parameters while a model is being constructed. Conv weights get
/// fan-in scaled uniform values (drawn at single precision so they survive a
/// save/load round trip unchanged); biases start at zero.
pub struct ParamBuilder {
    store: ParamStore,
    rng: ChaCha8Rng,
}

impl ParamBuilder {
    pub fn new(seed: u64) -> Self {
        ParamBuilder { store: ParamStore::new(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn kaiming(&mut self, name: String, shape: Shape, fan_in: usize) -> ParamId {
        let bound = (1.0 / fan_in as f64).sqrt() as f32;
        let rng = &mut self.rng;
        let t = Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-bound..bound) as f64);
        self.store.push(name, t)
    }

    pub fn zeros(&mut self, name: String, shape: Shape) -> ParamId {
        self.store.push(name, Tensor::zeros(shape))
    }

    pub fn finish(self) -> ParamStore {
        self.store
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    None,
    LeakyRelu,
    Sigmoid,
}

impl Activation {
    fn apply<G: Graph>(self, g: &mut G, x: G::Var) -> Result<G::Var> {
        match self {
            Activation::None => Ok(x),
            Activation::LeakyRelu => g.leaky_relu(&x, LEAKY_SLOPE),
            Activation::Sigmoid => g.sigmoid(&x),
        }
    }
}

/// Square-kernel convolution with per-channel bias and "same" zero padding.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub activation: Activation,
}

impl ConvLayer {
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    ) -> Self {
        assert!(kernel % 2 == 1, "conv layers use odd kernels");
        let weight = pb.kaiming(
            format!("{name}.weight"),
            Shape::new(out_channels, in_channels, kernel, kernel),
            in_channels * kernel * kernel,
        );
        let bias = pb.zeros(format!("{name}.bias"), Shape::new(1, out_channels, 1, 1));
        ConvLayer { weight, bias, in_channels, out_channels, kernel, activation }
    }

    pub fn padding(&self) -> usize {
        self.kernel / 2
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel + self.out_channels
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let w = g.param(self.weight, p.get(self.weight));
        let b = g.param(self.bias, p.get(self.bias));
        let y = g.conv2d(x, &w, Some(&b), 1, self.padding())?;
        self.activation.apply(g, y)
    }
}

/// Learned 2x upsampler: kernel 2, stride 2 transposed convolution.
#[derive(Clone, Debug)]
pub struct Upsample2x {
    pub weight: ParamId,
    pub bias: ParamId,
    pub channels: usize,
}

impl Upsample2x {
    pub fn new(pb: &mut ParamBuilder, name: &str, channels: usize) -> Self {
        // Each output pixel sees exactly one input pixel per channel.
        let weight = pb.kaiming(format!("{name}.weight"), Shape::new(channels, channels, 2, 2), channels);
        let bias = pb.zeros(format!("{name}.bias"), Shape::new(1, channels, 1, 1));
        Upsample2x { weight, bias, channels }
    }

    pub fn param_count(&self) -> usize {
        self.channels * self.channels * 4 + self.channels
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let w = g.param(self.weight, p.get(self.weight));
        let b = g.param(self.bias, p.get(self.bias));
        g.conv_transpose2d(x, &w, Some(&b), 2)
    }
}

/// 3x3 per-channel convolution followed by a 1x1 pointwise convolution.
#[derive(Clone, Debug)]
pub struct DsConv {
    pub depthwise: ParamId,
    pub depthwise_bias: ParamId,
    pub pointwise: ConvLayer,
    pub channels: usize,
}

impl DsConv {
    pub fn new(pb: &mut ParamBuilder, name: &str, channels: usize) -> Self {
        let depthwise = pb.kaiming(format!("{name}.depthwise.weight"), Shape::new(channels, 1, 3, 3), 9);
        let depthwise_bias = pb.zeros(format!("{name}.depthwise.bias"), Shape::new(1, channels, 1, 1));
        let pointwise = ConvLayer::new(pb, &format!("{name}.pointwise"), channels, channels, 1, Activation::None);
        DsConv { depthwise, depthwise_bias, pointwise, channels }
    }

    pub fn param_count(&self) -> usize {
        self.channels * 9 + self.channels + self.pointwise.param_count()
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let c = g.shape(x).channels;
        if c != self.channels {
            return Err(Error::shape("dsconv", format!("{c} input channels, layer expects {}", self.channels)));
        }
        let w = g.param(self.depthwise, p.get(self.depthwise));
        let b = g.param(self.depthwise_bias, p.get(self.depthwise_bias));
        let y = g.depthwise_conv2d(x, &w, Some(&b), 1)?;
        self.pointwise.forward(g, p, &y)
    }
}

/// Contrast channel attention: per-channel mean + standard deviation, squeezed
/// through two 1x1 convolutions into a sigmoid gate.
#[derive(Clone, Debug)]
pub struct Cca {
    pub reduce: ConvLayer,
    pub expand: ConvLayer,
    pub channels: usize,
}

impl Cca {
    pub fn new(pb: &mut ParamBuilder, name: &str, channels: usize, reduction: usize) -> Result<Self> {
        if reduction == 0 || channels % reduction != 0 {
            return Err(Error::InvalidConfig(format!(
                "attention width {channels} not divisible by reduction {reduction}"
            )));
        }
        let hidden = channels / reduction;
        let reduce = ConvLayer::new(pb, &format!("{name}.reduce"), channels, hidden, 1, Activation::LeakyRelu);
        let expand = ConvLayer::new(pb, &format!("{name}.expand"), hidden, channels, 1, Activation::Sigmoid);
        Ok(Cca { reduce, expand, channels })
    }

    pub fn param_count(&self) -> usize {
        self.reduce.param_count() + self.expand.param_count()
    }

    /// The `(B, C, 1, 1)` gate values.
    pub fn gate<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let c = g.shape(x).channels;
        if c != self.channels {
            return Err(Error::shape("cca", format!("{c} input channels, layer expects {}", self.channels)));
        }
        let t = g.channel_contrast(x)?;
        let h = self.reduce.forward(g, p, &t)?;
        self.expand.forward(g, p, &h)
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let gate = self.gate(g, p, x)?;
        g.scale_channels(x, &gate)
    }
}

/// 3x3 convolution to `3 * s^2` channels followed by pixel shuffle.
#[derive(Clone, Debug)]
pub struct ReconstructionHead {
    pub conv: ConvLayer,
    pub scale: usize,
}

impl ReconstructionHead {
    pub fn new(pb: &mut ParamBuilder, name: &str, channels: usize, scale: usize) -> Self {
        let conv = ConvLayer::new(pb, &format!("{name}.conv"), channels, 3 * scale * scale, 3, Activation::None);
        ReconstructionHead { conv, scale }
    }

    pub fn param_count(&self) -> usize {
        self.conv.param_count()
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let c = g.shape(x).channels;
        if c != self.conv.in_channels {
            return Err(Error::shape(
                "reconstruct",
                format!("{c} input channels, head expects {}", self.conv.in_channels),
            ));
        }
        let y = self.conv.forward(g, p, x)?;
        g.pixel_shuffle(&y, self.scale)
    }
}
