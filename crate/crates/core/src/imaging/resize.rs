use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::Image;

pub const BICUBIC_A: f64 = -0.5;

/// Cubic convolution kernel with `a = -0.5`.
pub fn bicubic_kernel(x: f64) -> f64 {
    let a = BICUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Resampling factor `num / den` with one side equal to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Factor {
    pub num: usize,
    pub den: usize,
}

impl Factor {
    pub fn up(s: usize) -> Result<Factor> {
        Factor::new(s, 1)
    }

    pub fn down(s: usize) -> Result<Factor> {
        Factor::new(1, s)
    }

    pub fn new(num: usize, den: usize) -> Result<Factor> {
        let ok = (num == 1 && (1..=4).contains(&den)) || (den == 1 && (1..=4).contains(&num));
        if !ok {
            return Err(Error::invalid("bicubic_resize", format!("unsupported factor {num}/{den}")));
        }
        Ok(Factor { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Output length for an input of `len`; rounds up like common image tools.
    pub fn apply(self, len: usize) -> Result<usize> {
        if len * self.num < self.den {
            return Err(Error::invalid("bicubic_resize", format!("length {len} collapses under factor {self}")));
        }
        Ok((len * self.num).div_ceil(self.den))
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Source taps and normalised weights for every output position.
fn contributions(in_len: usize, out_len: usize, scale: f64) -> Vec<(Vec<usize>, Vec<f64>)> {
    let (stretch, width) = if scale < 1.0 { (scale, 4.0 / scale) } else { (1.0, 4.0) };
    (0..out_len)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let first = (center - width / 2.0).floor() as i64;
            let last = (center + width / 2.0).ceil() as i64;
            let mut idx = Vec::new();
            let mut w = Vec::new();
            for j in first..=last {
                let k = stretch * bicubic_kernel(stretch * (center - j as f64));
                if k != 0.0 {
                    idx.push(j.clamp(0, in_len as i64 - 1) as usize);
                    w.push(k);
                }
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            (idx, w)
        })
        .collect()
}

/// Separable bicubic resampling of every plane of `t` to `out_h x out_w`,
/// with `scale` (output/input) setting the sampling grid and antialiasing.
pub fn resize_to(t: &Tensor, out_h: usize, out_w: usize, scale: f64) -> Result<Tensor> {
    let s = t.shape();
    if out_h == 0 || out_w == 0 || s.height == 0 || s.width == 0 || !(scale > 0.0) {
        return Err(Error::invalid("bicubic_resize", format!("{s} -> {out_h}x{out_w} at scale {scale}")));
    }
    let rows = contributions(s.height, out_h, scale);
    let cols = contributions(s.width, out_w, scale);
    let mid = Tensor::from_fn(s.with_spatial(s.height, out_w), |n, c, y, x| {
        let (idx, w) = &cols[x];
        let plane = t.plane(n, c);
        idx.iter().zip(w).map(|(&j, &k)| plane[y * s.width + j] * k).sum()
    });
    Ok(Tensor::from_fn(s.with_spatial(out_h, out_w), |n, c, y, x| {
        let (idx, w) = &rows[y];
        let plane = mid.plane(n, c);
        idx.iter().zip(w).map(|(&j, &k)| plane[j * out_w + x] * k).sum()
    }))
}

pub fn bicubic_resize(image: &Image, factor: Factor) -> Result<Image> {
    if factor.num == factor.den {
        return Ok(image.clone());
    }
    let (h, w) = (factor.apply(image.height())?, factor.apply(image.width())?);
    Image::new(resize_to(image.tensor(), h, w, factor.value())?, image.colorspace())
}
