use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, Factor, Image};
use crate::tensor::{Dihedral, Shape, Tensor};

use super::TrainConfig;

/// An LR/HR pair with `hr` exactly `scale` times the size of `lr`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePair {
    pub name: String,
    pub lr: Image,
    pub hr: Image,
    pub scale: usize,
}

impl ImagePair {
    /// Crops `hr` to a multiple of `scale` and synthesises the LR image by
    /// bicubic downscaling.
    pub fn from_hr(name: impl Into<String>, hr: &Image, scale: usize) -> Result<ImagePair> {
        let name = name.into();
        let hr = hr.mod_crop(scale).map_err(|e| Error::Data(format!("{name}: {e}")))?;
        let lr = bicubic_resize(&hr, Factor::down(scale)?)?;
        Ok(ImagePair { name, lr, hr, scale })
    }
}

fn window(t: &Tensor, top: usize, left: usize, size: usize) -> Tensor {
    Tensor::from_fn(t.shape().with_spatial(size, size), |n, c, y, x| t.at(n, c, top + y, left + x))
}

/// Draws `cfg.batch` aligned LR/HR patches. Each sample gets its own random
/// pair, crop origin and dihedral transform, applied identically to both.
pub fn sample_batch(pairs: &[ImagePair], cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<(Tensor, Tensor)> {
    let first = pairs.first().ok_or_else(|| Error::Data("no training pairs".into()))?;
    let p = cfg.patch;
    for pair in pairs {
        if pair.scale != first.scale {
            return Err(Error::Data(format!("{}: scale {} differs from {}", pair.name, pair.scale, first.scale)));
        }
        if pair.lr.height() < p || pair.lr.width() < p {
            return Err(Error::Data(format!(
                "{}: LR image {}x{} smaller than patch {p}",
                pair.name,
                pair.lr.height(),
                pair.lr.width()
            )));
        }
    }
    let s = first.scale;
    let mut lrs = Vec::with_capacity(cfg.batch);
    let mut hrs = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.batch {
        let pair = &pairs[rng.random_range(0..pairs.len())];
        let top = rng.random_range(0..=pair.lr.height() - p);
        let left = rng.random_range(0..=pair.lr.width() - p);
        let d = Dihedral::from_index(rng.random_range(0..8));
        lrs.push(d.apply(&window(pair.lr.tensor(), top, left, p)));
        hrs.push(d.apply(&window(pair.hr.tensor(), top * s, left * s, p * s)));
    }
    Ok((Tensor::stack_batch(&lrs)?, Tensor::stack_batch(&hrs)?))
}

/// A procedural RGB texture: oriented gratings over a few flat rectangles
/// and soft discs, giving both smooth regions and sharp edges.
pub fn synthetic_image(height: usize, width: usize, rng: &mut ChaCha8Rng) -> Result<Image> {
    let mut t = Tensor::from_fn(Shape::new(1, 3, height, width), |_, _, _, _| 0.0);
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..0.6));
    for c in 0..3 {
        t.data_mut()[c * height * width..(c + 1) * height * width].fill(base[c]);
    }
    for _ in 0..rng.random_range(2..5) {
        let (y0, x0) = (rng.random_range(0..height), rng.random_range(0..width));
        let (h, w) = (rng.random_range(height / 8..height / 2 + 1), rng.random_range(width / 8..width / 2 + 1));
        let colour: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        for c in 0..3 {
            for y in y0..(y0 + h).min(height) {
                for x in x0..(x0 + w).min(width) {
                    let i = t.offset(0, c, y, x);
                    t.data_mut()[i] = colour[c];
                }
            }
        }
    }
    for _ in 0..rng.random_range(1..3) {
        let (cy, cx) = (rng.random_range(0.0..height as f64), rng.random_range(0.0..width as f64));
        let r = rng.random_range(3.0..(height.min(width) as f64 / 3.0).max(4.0));
        let colour: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
                    let a = (r - d + 0.5).clamp(0.0, 1.0);
                    let i = t.offset(0, c, y, x);
                    t.data_mut()[i] = (1.0 - a) * t.data()[i] + a * colour[c];
                }
            }
        }
    }
    for _ in 0..rng.random_range(2..4) {
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let freq = rng.random_range(0.15..0.9);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let amp: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.03..0.15));
        let (dy, dx) = (theta.sin() * freq, theta.cos() * freq);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    let i = t.offset(0, c, y, x);
                    t.data_mut()[i] += amp[c] * (dy * y as f64 + dx * x as f64 + phase).sin();
                }
            }
        }
    }
    Image::rgb(t)
}

/// `count` synthetic HR images of `hr_size` squared and their LR versions.
pub fn synthetic_pairs(count: usize, hr_size: usize, scale: usize, seed: u64) -> Result<Vec<ImagePair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| ImagePair::from_hr(format!("synthetic_{i:02}"), &synthetic_image(hr_size, hr_size, &mut rng)?, scale))
        .collect()
}
