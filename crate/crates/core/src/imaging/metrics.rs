use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{ColorSpace, Image};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn luma_pair<'a>(op: &'static str, a: &'a Image, b: &'a Image) -> Result<(&'a Tensor, &'a Tensor)> {
    if a.colorspace() != ColorSpace::Y || b.colorspace() != ColorSpace::Y {
        return Err(Error::invalid(op, "both images must be luma (Y)"));
    }
    if a.tensor().shape() != b.tensor().shape() {
        return Err(Error::shape(op, format!("{} vs {}", a.tensor().shape(), b.tensor().shape())));
    }
    Ok((a.tensor(), b.tensor()))
}

/// PSNR in dB for data in `[0, 1]` after removing `shave` pixels from every
/// border. Identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, shave: usize) -> Result<f64> {
    let (ta, tb) = luma_pair("psnr", a, b)?;
    let (h, w) = (a.height(), a.width());
    if 2 * shave >= h || 2 * shave >= w {
        return Err(Error::invalid("psnr", format!("shave {shave} leaves nothing of {h}x{w}")));
    }
    let (pa, pb) = (ta.plane(0, 0), tb.plane(0, 0));
    let mut sum = 0.0;
    for y in shave..h - shave {
        for x in shave..w - shave {
            let d = pa[y * w + x] - pb[y * w + x];
            sum += d * d;
        }
    }
    let mse = sum / ((h - 2 * shave) * (w - 2 * shave)) as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Normalised 1-D Gaussian taps of the SSIM window.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut g: [f64; SSIM_WINDOW] = std::array::from_fn(|i| {
        let d = i as f64 - r;
        (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    });
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    g
}

/// Separable Gaussian filtering over valid window positions only.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = g.iter().enumerate().map(|(k, gk)| gk * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = g.iter().enumerate().map(|(k, gk)| gk * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), dynamic
/// range 1, averaged over all window positions fully inside the image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    let (ta, tb) = luma_pair("ssim", a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid("ssim", format!("{h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")));
    }
    let (pa, pb) = (ta.plane(0, 0), tb.plane(0, 0));
    let g = gaussian_window();
    let prod = |f: &dyn Fn(usize) -> f64| (0..h * w).map(f).collect::<Vec<f64>>();
    let mu_a = filter_valid(pa, h, w, &g);
    let mu_b = filter_valid(pb, h, w, &g);
    let aa = filter_valid(&prod(&|i| pa[i] * pa[i]), h, w, &g);
    let bb = filter_valid(&prod(&|i| pb[i] * pb[i]), h, w, &g);
    let ab = filter_valid(&prod(&|i| pa[i] * pb[i]), h, w, &g);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
