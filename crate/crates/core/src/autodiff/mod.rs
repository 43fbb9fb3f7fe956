//! Reverse-mode differentiation over the tensor primitives.
//!
//! Layers are written once against the [`Graph`] trait. [`Eval`] runs them
//! eagerly without recording anything, [`Tape`] records every op so that
//! [`Tape::backward`] can produce gradients, and the network's budget tracer
//! walks the same code with shapes only.

mod check;
mod tape;

use std::rc::Rc;

pub use check::{finite_diff_check, finite_diff_check_params, relative_error, FD_EPSILON};
pub use tape::{Gradients, Tape, Var};

use crate::error::Result;
use crate::tensor::{self, Shape, Tensor};

/// Index of a trainable tensor in a model's parameter store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Variance floor inside the square root of the contrast statistic.
pub const CONTRAST_EPS: f64 = 1e-8;

/// Operations a layer may use. Implementations decide whether values are
/// computed, recorded, or only shape-checked.
pub trait Graph {
    type Var: Clone;

    fn input(&mut self, value: Tensor) -> Self::Var;
    fn param(&mut self, id: ParamId, value: &Tensor) -> Self::Var;
    fn shape(&self, v: &Self::Var) -> Shape;

    fn conv2d(
        &mut self,
        x: &Self::Var,
        w: &Self::Var,
        b: Option<&Self::Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Self::Var>;
    fn conv_transpose2d(&mut self, x: &Self::Var, w: &Self::Var, b: Option<&Self::Var>, stride: usize) -> Result<Self::Var>;
    fn depthwise_conv2d(&mut self, x: &Self::Var, w: &Self::Var, b: Option<&Self::Var>, padding: usize) -> Result<Self::Var>;
    fn avg_pool2d(&mut self, x: &Self::Var, kernel: usize) -> Result<Self::Var>;
    fn pixel_shuffle(&mut self, x: &Self::Var, r: usize) -> Result<Self::Var>;
    fn narrow_channels(&mut self, x: &Self::Var, start: usize, len: usize) -> Result<Self::Var>;
    fn concat_channels(&mut self, parts: &[Self::Var]) -> Result<Self::Var>;
    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn sub(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn mul(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn scale(&mut self, x: &Self::Var, factor: f64) -> Result<Self::Var>;
    fn sigmoid(&mut self, x: &Self::Var) -> Result<Self::Var>;
    fn leaky_relu(&mut self, x: &Self::Var, slope: f64) -> Result<Self::Var>;
    /// Per-channel mean plus population standard deviation, shape `(B, C, 1, 1)`.
    fn channel_contrast(&mut self, x: &Self::Var) -> Result<Self::Var>;
    /// Multiplies each channel of `x` by the matching `(B, C, 1, 1)` gate value.
    fn scale_channels(&mut self, x: &Self::Var, gate: &Self::Var) -> Result<Self::Var>;
    fn reflect_pad(&mut self, x: &Self::Var, bottom: usize, right: usize) -> Result<Self::Var>;
    fn crop(&mut self, x: &Self::Var, height: usize, width: usize) -> Result<Self::Var>;

    fn split_channels(&mut self, x: &Self::Var, at: usize) -> Result<(Self::Var, Self::Var)> {
        let c = self.shape(x).channels;
        if at == 0 || at >= c {
            return Err(crate::Error::invalid("channel_split", format!("split point {at} with {c} channels")));
        }
        Ok((self.narrow_channels(x, 0, at)?, self.narrow_channels(x, at, c - at)?))
    }
}

/// Eager evaluation with no recording.
#[derive(Debug, Default)]
pub struct Eval;

impl Eval {
    pub fn new() -> Self {
        Eval
    }
}

fn checked(t: Tensor, op: &'static str) -> Result<Rc<Tensor>> {
    t.ensure_finite(op)?;
    Ok(Rc::new(t))
}

impl Graph for Eval {
    type Var = Rc<Tensor>;

    fn input(&mut self, value: Tensor) -> Rc<Tensor> {
        Rc::new(value)
    }

    fn param(&mut self, _id: ParamId, value: &Tensor) -> Rc<Tensor> {
        Rc::new(value.clone())
    }

    fn shape(&self, v: &Rc<Tensor>) -> Shape {
        v.shape()
    }

    fn conv2d(&mut self, x: &Rc<Tensor>, w: &Rc<Tensor>, b: Option<&Rc<Tensor>>, stride: usize, padding: usize) -> Result<Rc<Tensor>> {
        checked(tensor::conv2d(x, w, b.map(|b| &**b), stride, padding)?, "conv2d")
    }

    fn conv_transpose2d(&mut self, x: &Rc<Tensor>, w: &Rc<Tensor>, b: Option<&Rc<Tensor>>, stride: usize) -> Result<Rc<Tensor>> {
        checked(tensor::conv_transpose2d(x, w, b.map(|b| &**b), stride)?, "conv_transpose2d")
    }

    fn depthwise_conv2d(&mut self, x: &Rc<Tensor>, w: &Rc<Tensor>, b: Option<&Rc<Tensor>>, padding: usize) -> Result<Rc<Tensor>> {
        checked(tensor::depthwise_conv2d(x, w, b.map(|b| &**b), padding)?, "depthwise_conv2d")
    }

    fn avg_pool2d(&mut self, x: &Rc<Tensor>, kernel: usize) -> Result<Rc<Tensor>> {
        Ok(Rc::new(x.avg_pool2d(kernel, kernel)?))
    }

    fn pixel_shuffle(&mut self, x: &Rc<Tensor>, r: usize) -> Result<Rc<Tensor>> {
        Ok(Rc::new(x.pixel_shuffle(r)?))
    }

    fn narrow_channels(&mut self, x: &Rc<Tensor>, start: usize, len: usize) -> Result<Rc<Tensor>> {
        Ok(Rc::new(x.narrow_channels(start, len)?))
    }

    fn concat_channels(&mut self, parts: &[Rc<Tensor>]) -> Result<Rc<Tensor>> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| &**p).collect();
        Ok(Rc::new(Tensor::concat_channels(&refs)?))
    }

    fn add(&mut self, a: &Rc<Tensor>, b: &Rc<Tensor>) -> Result<Rc<Tensor>> {
        checked(a.add(b)?, "add")
    }

    fn sub(&mut self, a: &Rc<Tensor>, b: &Rc<Tensor>) -> Result<Rc<Tensor>> {
        checked(a.sub(b)?, "sub")
    }

    fn mul(&mut self, a: &Rc<Tensor>, b: &Rc<Tensor>) -> Result<Rc<Tensor>> {
        checked(a.mul(b)?, "mul")
    }

    fn scale(&mut self, x: &Rc<Tensor>, factor: f64) -> Result<Rc<Tensor>> {
        checked(x.scale(factor), "scale")
    }

    fn sigmoid(&mut self, x: &Rc<Tensor>) -> Result<Rc<Tensor>> {
        Ok(Rc::new(x.sigmoid()))
    }

    fn leaky_relu(&mut self, x: &Rc<Tensor>, slope: f64) -> Result<Rc<Tensor>> {
        Ok(Rc::new(x.leaky_relu(slope)))
    }

    fn channel_contrast(&mut self, x: &Rc<Tensor>) -> Result<Rc<Tensor>> {
        checked(contrast_forward(x), "channel_contrast")
    }

    fn scale_channels(&mut self, x: &Rc<Tensor>, gate: &Rc<Tensor>) -> Result<Rc<Tensor>> {
        checked(scale_channels_forward(x, gate)?, "scale_channels")
    }

    fn reflect_pad(&mut self, x: &Rc<Tensor>, bottom: usize, right: usize) -> Result<Rc<Tensor>> {
        Ok(Rc::new(x.reflect_pad(bottom, right)?))
    }

    fn crop(&mut self, x: &Rc<Tensor>, height: usize, width: usize) -> Result<Rc<Tensor>> {
        Ok(Rc::new(x.crop(height, width)?))
    }
}

pub(crate) fn contrast_forward(x: &Tensor) -> Tensor {
    let s = x.shape();
    let n = s.plane() as f64;
    let mut out = Tensor::zeros(Shape::new(s.batch, s.channels, 1, 1));
    for (i, plane) in x.data().chunks(s.plane()).enumerate() {
        let mean = plane.iter().sum::<f64>() / n;
        let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        out.data_mut()[i] = mean + (var + CONTRAST_EPS).sqrt();
    }
    out
}

pub(crate) fn scale_channels_forward(x: &Tensor, gate: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    if gate.shape() != Shape::new(s.batch, s.channels, 1, 1) {
        return Err(crate::Error::shape("scale_channels", format!("gate {} for input {s}", gate.shape())));
    }
    let mut out = x.clone();
    for (i, plane) in out.data_mut().chunks_mut(s.plane()).enumerate() {
        let g = gate.data()[i];
        plane.iter_mut().for_each(|v| *v *= g);
    }
    Ok(out)
}
