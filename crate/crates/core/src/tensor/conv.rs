//! Convolution kernels built on im2col + GEMM, plus their adjoints.
//!
//! Weights use the `(out, in, kh, kw)` layout for ordinary convolutions and
//! `(in, out, kh, kw)` for transposed convolutions, so the same tensor can be
//! passed to both when checking adjointness. Batch items are processed in
//! parallel; reductions across the batch are summed in item order.

use rayon::prelude::*;

use super::{Shape, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct Geometry {
    channels: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn new(op: &'static str, input: Shape, kh: usize, kw: usize, stride: usize, padding: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::invalid(op, "stride must be positive"));
        }
        let (ph, pw) = (input.height + 2 * padding, input.width + 2 * padding);
        if kh > ph || kw > pw {
            return Err(Error::shape(
                op,
                format!("{kh}x{kw} kernel larger than padded input {ph}x{pw}"),
            ));
        }
        Ok(Geometry {
            channels: input.channels,
            height: input.height,
            width: input.width,
            kh,
            kw,
            stride,
            padding,
            out_h: (ph - kh) / stride + 1,
            out_w: (pw - kw) / stride + 1,
        })
    }

    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// 1x1 kernels at stride 1 without padding read the input as-is.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0
    }

    fn im2col(&self, item: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        let mut col = vec![0.0; self.rows() * cols];
        let (pad, s) = (self.padding as isize, self.stride as isize);
        for c in 0..self.channels {
            let plane = &item[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (c * self.kh + ky) * self.kw + kx;
                    let dst = &mut col[row * cols..(row + 1) * cols];
                    for oy in 0..self.out_h {
                        let iy = oy as isize * s + ky as isize - pad;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let src_row = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for ox in 0..self.out_w {
                            let ix = ox as isize * s + kx as isize - pad;
                            if ix >= 0 && ix < self.width as isize {
                                dst[oy * self.out_w + ox] = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f64], item: &mut [f64]) {
        let cols = self.cols();
        let (pad, s) = (self.padding as isize, self.stride as isize);
        for c in 0..self.channels {
            let plane = &mut item[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (c * self.kh + ky) * self.kw + kx;
                    let src = &col[row * cols..(row + 1) * cols];
                    for oy in 0..self.out_h {
                        let iy = oy as isize * s + ky as isize - pad;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let base = iy as usize * self.width;
                        for ox in 0..self.out_w {
                            let ix = ox as isize * s + kx as isize - pad;
                            if ix >= 0 && ix < self.width as isize {
                                plane[base + ix as usize] += src[oy * self.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `c = a * b (+ c if accumulate)`, with `a` of logical shape `m x k` and `b` of `k x n`.
/// Transposed operands are read through strides rather than copied.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, c: &mut [f64], accumulate: bool) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: bounds asserted above; strides describe row-major storage of the
    // given logical shapes, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

fn check_bias(op: &'static str, bias: Option<&Tensor>, channels: usize) -> Result<()> {
    match bias {
        Some(b) if b.len() != channels => Err(Error::shape(
            op,
            format!("bias has {} values for {channels} output channels", b.len()),
        )),
        _ => Ok(()),
    }
}

/// Zero-padded 2-D cross-correlation. `weight` is `(out, in, kh, kw)`.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, stride: usize, padding: usize) -> Result<Tensor> {
    let ws = weight.shape();
    let is = input.shape();
    if ws.channels != is.channels {
        return Err(Error::shape(
            "conv2d",
            format!("input has {} channels, kernel {ws} expects {}", is.channels, ws.channels),
        ));
    }
    check_bias("conv2d", bias, ws.batch)?;
    let geo = Geometry::new("conv2d", is, ws.height, ws.width, stride, padding)?;
    let out_shape = Shape::new(is.batch, ws.batch, geo.out_h, geo.out_w);
    let mut out = Tensor::zeros(out_shape);
    let out_item = ws.batch * geo.cols();
    out.data_mut().par_chunks_mut(out_item).enumerate().for_each(|(n, dst)| {
        let item = input.item(n);
        if geo.is_pointwise() {
            gemm(ws.batch, geo.rows(), geo.cols(), weight.data(), false, item, false, dst, false);
        } else {
            let col = geo.im2col(item);
            gemm(ws.batch, geo.rows(), geo.cols(), weight.data(), false, &col, false, dst, false);
        }
    });
    if let Some(b) = bias {
        out.add_channel_bias(b)?;
    }
    Ok(out)
}

/// Gradient of [`conv2d`] with respect to its input, given the output gradient.
pub fn conv2d_input_grad(grad: &Tensor, weight: &Tensor, input: Shape, stride: usize, padding: usize) -> Result<Tensor> {
    let ws = weight.shape();
    let gs = grad.shape();
    let geo = Geometry::new("conv2d_input_grad", input, ws.height, ws.width, stride, padding)?;
    if ws.channels != input.channels
        || gs.channels != ws.batch
        || gs.batch != input.batch
        || (gs.height, gs.width) != (geo.out_h, geo.out_w)
    {
        return Err(Error::shape(
            "conv2d_input_grad",
            format!("gradient {gs}, kernel {ws}, input {input}"),
        ));
    }
    let mut out = Tensor::zeros(input);
    let in_item = input.channels * input.plane();
    out.data_mut().par_chunks_mut(in_item).enumerate().for_each(|(n, dst)| {
        let g = grad.item(n);
        if geo.is_pointwise() {
            gemm(geo.rows(), ws.batch, geo.cols(), weight.data(), true, g, false, dst, false);
        } else {
            let mut col = vec![0.0; geo.rows() * geo.cols()];
            gemm(geo.rows(), ws.batch, geo.cols(), weight.data(), true, g, false, &mut col, false);
            geo.col2im(&col, dst);
        }
    });
    Ok(out)
}

/// Gradient of [`conv2d`] with respect to its `(out, in, kh, kw)` kernel.
pub fn conv2d_weight_grad(
    input: &Tensor,
    grad: &Tensor,
    kernel: (usize, usize),
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let is = input.shape();
    let gs = grad.shape();
    let geo = Geometry::new("conv2d_weight_grad", is, kernel.0, kernel.1, stride, padding)?;
    if gs.batch != is.batch || (gs.height, gs.width) != (geo.out_h, geo.out_w) {
        return Err(Error::shape("conv2d_weight_grad", format!("gradient {gs}, input {is}")));
    }
    let wshape = Shape::new(gs.channels, is.channels, kernel.0, kernel.1);
    let partials: Vec<Vec<f64>> = (0..is.batch)
        .into_par_iter()
        .map(|n| {
            let mut dw = vec![0.0; wshape.numel()];
            let item = input.item(n);
            if geo.is_pointwise() {
                gemm(gs.channels, geo.cols(), geo.rows(), grad.item(n), false, item, true, &mut dw, false);
            } else {
                let col = geo.im2col(item);
                gemm(gs.channels, geo.cols(), geo.rows(), grad.item(n), false, &col, true, &mut dw, false);
            }
            dw
        })
        .collect();
    let mut total = vec![0.0; wshape.numel()];
    for p in &partials {
        total.iter_mut().zip(p).for_each(|(t, v)| *t += v);
    }
    Tensor::new(wshape, total)
}

/// Transposed convolution without padding. `weight` is `(in, out, kh, kw)`;
/// output size is `(h - 1) * stride + kh`.
pub fn conv_transpose2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, stride: usize) -> Result<Tensor> {
    let is = input.shape();
    let ws = weight.shape();
    if stride == 0 {
        return Err(Error::invalid("conv_transpose2d", "stride must be positive"));
    }
    if ws.batch != is.channels {
        return Err(Error::shape(
            "conv_transpose2d",
            format!("input has {} channels, kernel {ws} expects {}", is.channels, ws.batch),
        ));
    }
    check_bias("conv_transpose2d", bias, ws.channels)?;
    let out_shape = Shape::new(
        is.batch,
        ws.channels,
        (is.height - 1) * stride + ws.height,
        (is.width - 1) * stride + ws.width,
    );
    let mut out = conv2d_input_grad(input, weight, out_shape, stride, 0)?;
    if let Some(b) = bias {
        out.add_channel_bias(b)?;
    }
    Ok(out)
}

fn depthwise_check(op: &'static str, input: Shape, weight: Shape, padding: usize) -> Result<(usize, usize)> {
    if weight.batch != input.channels || weight.channels != 1 {
        return Err(Error::shape(op, format!("kernel {weight} for {} channels", input.channels)));
    }
    let (ph, pw) = (input.height + 2 * padding, input.width + 2 * padding);
    if weight.height > ph || weight.width > pw {
        return Err(Error::shape(op, format!("kernel {weight} larger than padded input {ph}x{pw}")));
    }
    Ok((ph - weight.height + 1, pw - weight.width + 1))
}

/// Per-channel convolution at stride 1. `weight` is `(channels, 1, kh, kw)`.
pub fn depthwise_conv2d(input: &Tensor, weight: &Tensor, bias: Option<&Tensor>, padding: usize) -> Result<Tensor> {
    let is = input.shape();
    let ws = weight.shape();
    let (oh, ow) = depthwise_check("depthwise_conv2d", is, ws, padding)?;
    check_bias("depthwise_conv2d", bias, is.channels)?;
    let mut out = Tensor::zeros(is.with_spatial(oh, ow));
    let pad = padding as isize;
    out.data_mut().par_chunks_mut(oh * ow).enumerate().for_each(|(i, dst)| {
        let c = i % is.channels;
        let src = &input.data()[i * is.plane()..(i + 1) * is.plane()];
        let k = weight.item(c);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for ky in 0..ws.height {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= is.height as isize {
                        continue;
                    }
                    for kx in 0..ws.width {
                        let ix = ox as isize + kx as isize - pad;
                        if ix >= 0 && ix < is.width as isize {
                            acc += k[ky * ws.width + kx] * src[iy as usize * is.width + ix as usize];
                        }
                    }
                }
                dst[oy * ow + ox] = acc;
            }
        }
    });
    if let Some(b) = bias {
        out.add_channel_bias(b)?;
    }
    Ok(out)
}

pub fn depthwise_input_grad(grad: &Tensor, weight: &Tensor, input: Shape, padding: usize) -> Result<Tensor> {
    let ws = weight.shape();
    let (oh, ow) = depthwise_check("depthwise_input_grad", input, ws, padding)?;
    let gs = grad.shape();
    if gs != input.with_spatial(oh, ow) {
        return Err(Error::shape("depthwise_input_grad", format!("gradient {gs}, input {input}")));
    }
    let mut out = Tensor::zeros(input);
    let pad = padding as isize;
    out.data_mut().par_chunks_mut(input.plane()).enumerate().for_each(|(i, dst)| {
        let c = i % input.channels;
        let g = &grad.data()[i * oh * ow..(i + 1) * oh * ow];
        let k = weight.item(c);
        for oy in 0..oh {
            for ox in 0..ow {
                let go = g[oy * ow + ox];
                for ky in 0..ws.height {
                    let iy = oy as isize + ky as isize - pad;
                    if iy < 0 || iy >= input.height as isize {
                        continue;
                    }
                    for kx in 0..ws.width {
                        let ix = ox as isize + kx as isize - pad;
                        if ix >= 0 && ix < input.width as isize {
                            dst[iy as usize * input.width + ix as usize] += k[ky * ws.width + kx] * go;
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

pub fn depthwise_weight_grad(input: &Tensor, grad: &Tensor, kernel: (usize, usize), padding: usize) -> Result<Tensor> {
    let is = input.shape();
    let ws = Shape::new(is.channels, 1, kernel.0, kernel.1);
    let (oh, ow) = depthwise_check("depthwise_weight_grad", is, ws, padding)?;
    let gs = grad.shape();
    if gs != is.with_spatial(oh, ow) {
        return Err(Error::shape("depthwise_weight_grad", format!("gradient {gs}, input {is}")));
    }
    let pad = padding as isize;
    let mut dw = Tensor::zeros(ws);
    let taps = kernel.0 * kernel.1;
    dw.data_mut().par_chunks_mut(taps).enumerate().for_each(|(c, dst)| {
        for n in 0..is.batch {
            let src = input.plane(n, c);
            let g = grad.plane(n, c);
            for ky in 0..kernel.0 {
                for kx in 0..kernel.1 {
                    let mut acc = 0.0;
                    for oy in 0..oh {
                        let iy = oy as isize + ky as isize - pad;
                        if iy < 0 || iy >= is.height as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = ox as isize + kx as isize - pad;
                            if ix >= 0 && ix < is.width as isize {
                                acc += g[oy * ow + ox] * src[iy as usize * is.width + ix as usize];
                            }
                        }
                    }
                    dst[ky * kernel.1 + kx] += acc;
                }
            }
        }
    });
    Ok(dw)
}
