//! Parameter and multiply-accumulate accounting.

use crate::autodiff::{Graph, ParamId};
use crate::error::{Error, Result};
use crate::layers::ParamStore;
use crate::tensor::{Shape, Tensor};

use super::Model;

/// Parameter counts grouped by name prefix, in construction order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBreakdown {
    pub total: usize,
    pub groups: Vec<(String, usize)>,
}

/// Splits a parameter name into units, attaching numeric indices to the
/// segment before them: `lffb.0.hffb.1.fuse.weight` gives
/// `[lffb.0, hffb.1, fuse, weight]`.
fn units(name: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for seg in name.split('.') {
        match out.last_mut() {
            Some(last) if seg.bytes().all(|b| b.is_ascii_digit()) => {
                last.push('.');
                last.push_str(seg);
            }
            _ => out.push(seg.to_string()),
        }
    }
    out
}

impl ParamBreakdown {
    /// Top-level components (`sfe`, each `lffb.i`, global fusion, head).
    pub fn of(store: &ParamStore) -> Self {
        Self::grouped(store, 1)
    }

    /// Groups by the first `depth` units of each name; the trailing
    /// `weight`/`bias` unit is never used as a group key.
    pub fn grouped(store: &ParamStore, depth: usize) -> Self {
        let mut groups: Vec<(String, usize)> = Vec::new();
        for (_, name, t) in store.iter() {
            let u = units(name);
            let keep = depth.min(u.len().saturating_sub(1)).max(1);
            let key = u[..keep].join(".");
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, n)) => *n += t.len(),
                None => groups.push((key, t.len())),
            }
        }
        ParamBreakdown { total: store.scalar_count(), groups }
    }

    /// Groups whose key starts with `prefix`.
    pub fn filter(&self, prefix: &str) -> Vec<(String, usize)> {
        self.groups.iter().filter(|(k, _)| k.starts_with(prefix)).cloned().collect()
    }
}

/// A [`Graph`] that only propagates shapes and accumulates MACs.
///
/// Convolutions count one MAC per (output element, input channel, tap);
/// transposed convolutions count one per (input element, output channel,
/// tap); depthwise convolutions one per (output element, tap). Elementwise
/// ops, pooling and shuffles are free.
#[derive(Debug, Default)]
pub struct ShapeTracer {
    pub macs: u64,
}

impl ShapeTracer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input_shape(&mut self, shape: Shape) -> Shape {
        shape
    }
}

fn same(op: &'static str, a: Shape, b: Shape) -> Result<Shape> {
    if a == b {
        Ok(a)
    } else {
        Err(Error::shape(op, format!("{a} vs {b}")))
    }
}

impl Graph for ShapeTracer {
    type Var = Shape;

    fn input(&mut self, value: Tensor) -> Shape {
        value.shape()
    }

    fn param(&mut self, _id: ParamId, value: &Tensor) -> Shape {
        value.shape()
    }

    fn shape(&self, v: &Shape) -> Shape {
        *v
    }

    fn conv2d(&mut self, x: &Shape, w: &Shape, _b: Option<&Shape>, stride: usize, padding: usize) -> Result<Shape> {
        if w.channels != x.channels {
            return Err(Error::shape("conv2d", format!("input {x}, weight {w}")));
        }
        let (ph, pw) = (x.height + 2 * padding, x.width + 2 * padding);
        if ph < w.height || pw < w.width || stride == 0 {
            return Err(Error::shape("conv2d", format!("input {x} too small for kernel {w}")));
        }
        let out = Shape::new(x.batch, w.batch, (ph - w.height) / stride + 1, (pw - w.width) / stride + 1);
        self.macs += (out.numel() * w.channels * w.height * w.width) as u64;
        Ok(out)
    }

    fn conv_transpose2d(&mut self, x: &Shape, w: &Shape, _b: Option<&Shape>, stride: usize) -> Result<Shape> {
        if w.batch != x.channels {
            return Err(Error::shape("conv_transpose2d", format!("input {x}, weight {w}")));
        }
        let out = Shape::new(
            x.batch,
            w.channels,
            (x.height - 1) * stride + w.height,
            (x.width - 1) * stride + w.width,
        );
        self.macs += (x.numel() * w.channels * w.height * w.width) as u64;
        Ok(out)
    }

    fn depthwise_conv2d(&mut self, x: &Shape, w: &Shape, _b: Option<&Shape>, padding: usize) -> Result<Shape> {
        if w.batch != x.channels || w.channels != 1 {
            return Err(Error::shape("depthwise_conv2d", format!("input {x}, weight {w}")));
        }
        let out = x.with_spatial(x.height + 2 * padding + 1 - w.height, x.width + 2 * padding + 1 - w.width);
        self.macs += (out.numel() * w.height * w.width) as u64;
        Ok(out)
    }

    fn avg_pool2d(&mut self, x: &Shape, kernel: usize) -> Result<Shape> {
        if kernel == 0 || x.height % kernel != 0 || x.width % kernel != 0 {
            return Err(Error::shape("avg_pool2d", format!("{x} not divisible by {kernel}")));
        }
        Ok(x.with_spatial(x.height / kernel, x.width / kernel))
    }

    fn pixel_shuffle(&mut self, x: &Shape, r: usize) -> Result<Shape> {
        if x.channels % (r * r) != 0 {
            return Err(Error::shape("pixel_shuffle", format!("{x} channels not divisible by {}", r * r)));
        }
        Ok(Shape::new(x.batch, x.channels / (r * r), x.height * r, x.width * r))
    }

    fn narrow_channels(&mut self, x: &Shape, start: usize, len: usize) -> Result<Shape> {
        if start + len > x.channels {
            return Err(Error::shape("narrow_channels", format!("{start}+{len} > {}", x.channels)));
        }
        Ok(x.with_channels(len))
    }

    fn concat_channels(&mut self, parts: &[Shape]) -> Result<Shape> {
        let first = *parts.first().ok_or_else(|| Error::invalid("concat_channels", "no inputs"))?;
        let mut c = 0;
        for p in parts {
            same("concat_channels", p.with_channels(0), first.with_channels(0))?;
            c += p.channels;
        }
        Ok(first.with_channels(c))
    }

    fn add(&mut self, a: &Shape, b: &Shape) -> Result<Shape> {
        same("add", *a, *b)
    }

    fn sub(&mut self, a: &Shape, b: &Shape) -> Result<Shape> {
        same("sub", *a, *b)
    }

    fn mul(&mut self, a: &Shape, b: &Shape) -> Result<Shape> {
        same("mul", *a, *b)
    }

    fn scale(&mut self, x: &Shape, _factor: f64) -> Result<Shape> {
        Ok(*x)
    }

    fn sigmoid(&mut self, x: &Shape) -> Result<Shape> {
        Ok(*x)
    }

    fn leaky_relu(&mut self, x: &Shape, _slope: f64) -> Result<Shape> {
        Ok(*x)
    }

    fn channel_contrast(&mut self, x: &Shape) -> Result<Shape> {
        Ok(x.with_spatial(1, 1))
    }

    fn scale_channels(&mut self, x: &Shape, gate: &Shape) -> Result<Shape> {
        same("scale_channels", x.with_spatial(1, 1), *gate)?;
        Ok(*x)
    }

    fn reflect_pad(&mut self, x: &Shape, bottom: usize, right: usize) -> Result<Shape> {
        if bottom >= x.height || right >= x.width {
            return Err(Error::shape("reflect_pad", format!("{x} too small to pad by {bottom},{right}")));
        }
        Ok(x.with_spatial(x.height + bottom, x.width + right))
    }

    fn crop(&mut self, x: &Shape, height: usize, width: usize) -> Result<Shape> {
        if height > x.height || width > x.width {
            return Err(Error::shape("crop", format!("{x} smaller than {height}x{width}")));
        }
        Ok(x.with_spatial(height, width))
    }
}

fn lr_shape(model: &Model, out_height: usize, out_width: usize) -> Shape {
    let s = model.config().scale;
    Shape::new(1, 3, out_height.div_ceil(s), out_width.div_ceil(s))
}

/// Multiply-accumulates of one forward pass producing an SR image of
/// `out_height` x `out_width`. The LR input is `ceil(out / scale)` on each
/// side, so odd-size padding is included.
pub fn multi_adds(model: &Model, out_height: usize, out_width: usize) -> Result<u64> {
    let mut g = ShapeTracer::new();
    let x = g.input_shape(lr_shape(model, out_height, out_width));
    model.forward_graph(&mut g, &x)?;
    Ok(g.macs)
}

/// MACs per top-level stage and per part of the first HFFB.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacBreakdown {
    pub total: u64,
    pub stages: Vec<(String, u64)>,
    pub hffb_parts: Vec<(String, u64)>,
}

pub fn multi_adds_breakdown(model: &Model, out_height: usize, out_width: usize) -> Result<MacBreakdown> {
    let lr = lr_shape(model, out_height, out_width);
    let mut g = ShapeTracer::new();
    let x = g.input_shape(lr);
    let mut stages = Vec::new();
    let mut last = 0;
    model.forward_staged(&mut g, &x, |g, name| {
        stages.push((name.to_string(), g.macs - last));
        last = g.macs;
    })?;
    let total = g.macs;

    let c = model.config().channels;
    let feat = Shape::new(1, c, lr.height + lr.height % 2, lr.width + lr.width % 2);
    let half = feat.with_channels(c / 2);
    let p = model.params();
    let block = model.hffbs()[0];
    let mut parts = Vec::new();
    let mut trace = |name: &str, f: &dyn Fn(&mut ShapeTracer) -> Result<Shape>| -> Result<()> {
        let mut t = ShapeTracer::new();
        f(&mut t)?;
        parts.push((name.to_string(), t.macs));
        Ok(())
    };
    trace("entry", &|t| block.entry.forward(t, p, &feat))?;
    trace("high", &|t| match &block.high {
        crate::blocks::HighBranch::Enhance(h) => h.forward(t, p, &half),
        crate::blocks::HighBranch::Plain(cv) => cv.forward(t, p, &half),
    })?;
    trace("low", &|t| match &block.low {
        crate::blocks::LowBranch::DeRedundant(l) => l.forward(t, p, &half),
        crate::blocks::LowBranch::Plain(cv) => cv.forward(t, p, &half),
    })?;
    trace("fuse", &|t| block.fuse.forward(t, p, &feat))?;
    Ok(MacBreakdown { total, stages, hffb_parts: parts })
}
