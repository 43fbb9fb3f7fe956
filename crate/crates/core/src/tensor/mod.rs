//! Dense NCHW tensors and the pointwise, pooling and rearrangement primitives
//! the network is assembled from.
//!
//! Every operation takes its inputs by reference and returns a fresh tensor.
//! Data is stored row-major with width varying fastest.

mod conv;
mod dihedral;

use std::fmt;

pub use conv::{
    conv2d, conv2d_input_grad, conv2d_weight_grad, conv_transpose2d, depthwise_conv2d,
    depthwise_input_grad, depthwise_weight_grad,
};
pub use dihedral::Dihedral;

use crate::error::{Error, Result};

/// Extent of a 4-D feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Shape { batch, channels, height, width }
    }

    pub const fn scalar() -> Self {
        Shape::new(1, 1, 1, 1)
    }

    pub const fn numel(&self) -> usize {
        self.batch * self.channels * self.height * self.width
    }

    pub const fn plane(&self) -> usize {
        self.height * self.width
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }

    pub fn with_channels(self, channels: usize) -> Self {
        Shape { channels, ..self }
    }

    pub fn with_spatial(self, height: usize, width: usize) -> Self {
        Shape { height, width, ..self }
    }

    fn is_valid(&self) -> bool {
        self.dims().iter().all(|&d| d >= 1)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.batch, self.channels, self.height, self.width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if !shape.is_valid() {
            return Err(Error::shape("tensor", format!("zero-sized dimension in {shape}")));
        }
        if data.len() != shape.numel() {
            return Err(Error::shape(
                "tensor",
                format!("{} values for shape {shape} ({} expected)", data.len(), shape.numel()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: Shape, value: f64) -> Self {
        assert!(shape.is_valid(), "zero-sized dimension in {shape}");
        Tensor { shape, data: vec![value; shape.numel()] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: Shape::scalar(), data: vec![value] }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        assert!(shape.is_valid(), "zero-sized dimension in {shape}");
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.batch {
            for c in 0..shape.channels {
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let s = self.shape;
        ((n * s.channels + c) * s.height + y) * s.width + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.offset(n, c, y, x)]
    }

    /// Contiguous `(height, width)` plane of one channel.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let p = self.shape.plane();
        let start = (n * self.shape.channels + c) * p;
        &self.data[start..start + p]
    }

    /// Contiguous `(channels, height, width)` block of one batch item.
    pub fn item(&self, n: usize) -> &[f64] {
        let len = self.shape.channels * self.shape.plane();
        &self.data[n * len..(n + 1) * len]
    }

    /// The single value of a `(1, 1, 1, 1)` tensor.
    pub fn value(&self) -> Result<f64> {
        if self.shape != Shape::scalar() {
            return Err(Error::NotScalar(self.shape.to_string()));
        }
        Ok(self.data[0])
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { op })
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(op, format!("{} vs {}", self.shape, other.shape)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Tensor { shape: self.shape, data })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        self.map(|v| if v >= 0.0 { v } else { slope * v })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape("dot", format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape("max_abs_diff", format!("{} vs {}", self.shape, other.shape)));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Adds `bias[c]` to every element of channel `c`.
    pub fn add_channel_bias(&mut self, bias: &Tensor) -> Result<()> {
        let s = self.shape;
        if bias.len() != s.channels {
            return Err(Error::shape("bias", format!("{} values for {} channels", bias.len(), s.channels)));
        }
        let plane = s.plane();
        for (i, chunk) in self.data.chunks_mut(plane).enumerate() {
            let b = bias.data[i % s.channels];
            chunk.iter_mut().for_each(|v| *v += b);
        }
        Ok(())
    }

    /// Sum over batch and spatial positions, one value per channel.
    pub fn channel_sums(&self) -> Vec<f64> {
        let s = self.shape;
        let mut out = vec![0.0; s.channels];
        for (i, chunk) in self.data.chunks(s.plane()).enumerate() {
            out[i % s.channels] += chunk.iter().sum::<f64>();
        }
        out
    }

    /// Channels `start..start + len`.
    pub fn narrow_channels(&self, start: usize, len: usize) -> Result<Tensor> {
        let s = self.shape;
        if len == 0 || start + len > s.channels {
            return Err(Error::invalid(
                "narrow_channels",
                format!("range {start}..{} outside {} channels", start + len, s.channels),
            ));
        }
        let plane = s.plane();
        let mut data = Vec::with_capacity(s.batch * len * plane);
        for n in 0..s.batch {
            let base = (n * s.channels + start) * plane;
            data.extend_from_slice(&self.data[base..base + len * plane]);
        }
        Ok(Tensor { shape: s.with_channels(len), data })
    }

    /// Splits into channels `..at` and `at..`.
    pub fn split_channels(&self, at: usize) -> Result<(Tensor, Tensor)> {
        let c = self.shape.channels;
        if at == 0 || at >= c {
            return Err(Error::invalid("channel_split", format!("split point {at} with {c} channels")));
        }
        Ok((self.narrow_channels(0, at)?, self.narrow_channels(at, c - at)?))
    }

    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::invalid("channel_concat", "no inputs"))?;
        let base = first.shape;
        for p in parts {
            let s = p.shape;
            if (s.batch, s.height, s.width) != (base.batch, base.height, base.width) {
                return Err(Error::shape("channel_concat", format!("{s} vs {base}")));
            }
        }
        let channels = parts.iter().map(|p| p.shape.channels).sum();
        let plane = base.plane();
        let mut data = Vec::with_capacity(base.batch * channels * plane);
        for n in 0..base.batch {
            for p in parts {
                data.extend_from_slice(p.item(n));
            }
        }
        debug_assert_eq!(data.len(), base.batch * channels * plane);
        Ok(Tensor { shape: base.with_channels(channels), data })
    }

    /// Moves groups of `r * r` channels onto an `r`-times larger grid.
    pub fn pixel_shuffle(&self, r: usize) -> Result<Tensor> {
        let s = self.shape;
        if r == 0 || s.channels % (r * r) != 0 {
            return Err(Error::invalid(
                "pixel_shuffle",
                format!("{} channels not divisible by {r}^2", s.channels),
            ));
        }
        let out_c = s.channels / (r * r);
        let out_shape = Shape::new(s.batch, out_c, s.height * r, s.width * r);
        let mut out = Tensor::zeros(out_shape);
        for n in 0..s.batch {
            for c in 0..s.channels {
                let (oc, sub) = (c / (r * r), c % (r * r));
                let (i, j) = (sub / r, sub % r);
                for y in 0..s.height {
                    for x in 0..s.width {
                        let dst = out.offset(n, oc, y * r + i, x * r + j);
                        out.data[dst] = self.at(n, c, y, x);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::pixel_shuffle`].
    pub fn pixel_unshuffle(&self, r: usize) -> Result<Tensor> {
        let s = self.shape;
        if r == 0 || s.height % r != 0 || s.width % r != 0 {
            return Err(Error::invalid(
                "pixel_unshuffle",
                format!("spatial size {}x{} not divisible by {r}", s.height, s.width),
            ));
        }
        let out_shape = Shape::new(s.batch, s.channels * r * r, s.height / r, s.width / r);
        let mut out = Tensor::zeros(out_shape);
        for n in 0..s.batch {
            for oc in 0..out_shape.channels {
                let (c, sub) = (oc / (r * r), oc % (r * r));
                let (i, j) = (sub / r, sub % r);
                for y in 0..out_shape.height {
                    for x in 0..out_shape.width {
                        let dst = out.offset(n, oc, y, x);
                        out.data[dst] = self.at(n, c, y * r + i, x * r + j);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Window mean with a square `kernel`, restricted to `kernel == stride`
    /// tilings that cover the input exactly.
    pub fn avg_pool2d(&self, kernel: usize, stride: usize) -> Result<Tensor> {
        let s = self.shape;
        if kernel == 0 || stride != kernel {
            return Err(Error::invalid("avg_pool2d", format!("kernel {kernel} with stride {stride}")));
        }
        if s.height % stride != 0 || s.width % stride != 0 {
            return Err(Error::invalid(
                "avg_pool2d",
                format!("spatial size {}x{} not divisible by {stride}", s.height, s.width),
            ));
        }
        let (oh, ow) = (s.height / stride, s.width / stride);
        let norm = 1.0 / (kernel * kernel) as f64;
        let mut out = Tensor::zeros(s.with_spatial(oh, ow));
        for n in 0..s.batch {
            for c in 0..s.channels {
                let src = self.plane(n, c);
                let base = out.offset(n, c, 0, 0);
                for oy in 0..oh {
                    for ox in 0..ow {
                        // Mean taken relative to the window's first value so
                        // constant windows reproduce that value exactly.
                        let anchor = src[oy * stride * s.width + ox * stride];
                        let mut acc = 0.0;
                        for ky in 0..kernel {
                            let row = (oy * stride + ky) * s.width + ox * stride;
                            acc += src[row..row + kernel].iter().map(|v| v - anchor).sum::<f64>();
                        }
                        out.data[base + oy * ow + ox] = anchor + acc * norm;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Backward of [`Tensor::avg_pool2d`]: spreads each gradient evenly over its window.
    pub fn avg_pool2d_grad(grad: &Tensor, input: Shape, kernel: usize) -> Result<Tensor> {
        let g = grad.shape;
        if g.height * kernel != input.height || g.width * kernel != input.width {
            return Err(Error::shape("avg_pool2d_grad", format!("{g} vs input {input}")));
        }
        let norm = 1.0 / (kernel * kernel) as f64;
        Ok(Tensor::from_fn(input, |n, c, y, x| grad.at(n, c, y / kernel, x / kernel) * norm))
    }

    /// Reflect-pads the bottom and right edges (edge pixel not repeated).
    pub fn reflect_pad(&self, bottom: usize, right: usize) -> Result<Tensor> {
        let s = self.shape;
        if bottom >= s.height.max(2) || right >= s.width.max(2) || (bottom > 0 && s.height < 2) || (right > 0 && s.width < 2) {
            return Err(Error::invalid(
                "reflect_pad",
                format!("padding ({bottom}, {right}) too large for {}x{}", s.height, s.width),
            ));
        }
        let out_shape = s.with_spatial(s.height + bottom, s.width + right);
        Ok(Tensor::from_fn(out_shape, |n, c, y, x| {
            self.at(n, c, reflect_index(y, s.height), reflect_index(x, s.width))
        }))
    }

    /// Backward of [`Tensor::reflect_pad`].
    pub fn reflect_pad_grad(grad: &Tensor, input: Shape) -> Result<Tensor> {
        let g = grad.shape;
        if g.height < input.height || g.width < input.width || g.channels != input.channels {
            return Err(Error::shape("reflect_pad_grad", format!("{g} vs input {input}")));
        }
        let mut out = Tensor::zeros(input);
        for n in 0..g.batch {
            for c in 0..g.channels {
                for y in 0..g.height {
                    for x in 0..g.width {
                        let dst = out.offset(n, c, reflect_index(y, input.height), reflect_index(x, input.width));
                        out.data[dst] += grad.at(n, c, y, x);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Keeps the top-left `height x width` window.
    pub fn crop(&self, height: usize, width: usize) -> Result<Tensor> {
        let s = self.shape;
        if height == 0 || width == 0 || height > s.height || width > s.width {
            return Err(Error::invalid("crop", format!("{height}x{width} from {}x{}", s.height, s.width)));
        }
        Ok(Tensor::from_fn(s.with_spatial(height, width), |n, c, y, x| self.at(n, c, y, x)))
    }

    /// Backward of [`Tensor::crop`]: zero-fills the discarded region.
    pub fn crop_grad(grad: &Tensor, input: Shape) -> Result<Tensor> {
        let g = grad.shape;
        if g.height > input.height || g.width > input.width || g.channels != input.channels {
            return Err(Error::shape("crop_grad", format!("{g} vs input {input}")));
        }
        Ok(Tensor::from_fn(input, |n, c, y, x| {
            if y < g.height && x < g.width {
                grad.at(n, c, y, x)
            } else {
                0.0
            }
        }))
    }

    /// Copy of batch items `start..start + len`.
    pub fn narrow_batch(&self, start: usize, len: usize) -> Result<Tensor> {
        let s = self.shape;
        if len == 0 || start + len > s.batch {
            return Err(Error::invalid("narrow_batch", format!("{start}+{len} of {}", s.batch)));
        }
        let item = s.channels * s.plane();
        let data = self.data[start * item..(start + len) * item].to_vec();
        Ok(Tensor { shape: Shape { batch: len, ..s }, data })
    }

    pub fn stack_batch(items: &[Tensor]) -> Result<Tensor> {
        let first = items.first().ok_or_else(|| Error::invalid("stack_batch", "no inputs"))?;
        let s = first.shape;
        let mut data = Vec::with_capacity(items.len() * s.numel());
        for t in items {
            if t.shape != s {
                return Err(Error::shape("stack_batch", format!("{} vs {s}", t.shape)));
            }
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor { shape: Shape { batch: s.batch * items.len(), ..s }, data })
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Mirror index without edge repetition: `n, n+1, ..` map to `n-2, n-3, ..`.
fn reflect_index(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        2 * (n - 1) - i
    }
}
