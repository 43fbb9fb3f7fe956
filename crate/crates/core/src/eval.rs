//! Dataset evaluation: bicubic LR synthesis, super-resolution and Y-channel
//! PSNR/SSIM with a `scale`-pixel border shave.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{bicubic_resize, load_png, psnr, rgb_to_y, ssim, EvalReport, Factor, Image, ImageScore};
use crate::network::Model;

/// What turns an LR image into an SR image.
#[derive(Clone, Copy, Debug)]
pub enum Upscaler<'a> {
    Network { model: &'a Model, self_ensemble: bool },
    /// Plain bicubic interpolation, as a reference point.
    Bicubic { scale: usize },
}

impl Upscaler<'_> {
    pub fn scale(&self) -> usize {
        match self {
            Upscaler::Network { model, .. } => model.config().scale,
            Upscaler::Bicubic { scale } => *scale,
        }
    }

    pub fn upscale(&self, lr: &Image) -> Result<Image> {
        match self {
            Upscaler::Network { model, self_ensemble } => {
                let out = if *self_ensemble { model.self_ensemble_forward(lr.tensor())? } else { model.forward(lr.tensor())? };
                Image::rgb(out)
            }
            Upscaler::Bicubic { scale } => bicubic_resize(lr, Factor::up(*scale)?),
        }
    }
}

/// Sorted `*.png` files directly inside `dir`.
pub fn list_pngs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("no PNG images in {}", dir.display())));
    }
    Ok(files)
}

/// Scores one HR image: crop to a multiple of the scale, downscale, upscale,
/// round to 8 bits, then compare luma with the border shaved.
pub fn score_image(name: &str, hr: &Image, upscaler: &Upscaler<'_>) -> Result<ImageScore> {
    let s = upscaler.scale();
    let hr = hr.mod_crop(s)?;
    let lr = bicubic_resize(&hr, Factor::down(s)?)?;
    let sr = upscaler.upscale(&lr)?.quantized();
    let (ys, yh) = (rgb_to_y(&sr)?, rgb_to_y(&hr)?);
    let psnr = psnr(&ys, &yh, s)?;
    let crop = |img: &Image| -> Result<Image> {
        let t = img.tensor();
        let (h, w) = (img.height() - 2 * s, img.width() - 2 * s);
        Image::luma(crate::tensor::Tensor::from_fn(t.shape().with_spatial(h, w), |n, c, y, x| t.at(n, c, y + s, x + s)))
    };
    let ssim = ssim(&crop(&ys)?, &crop(&yh)?)?;
    Ok(ImageScore { name: name.to_string(), psnr, ssim })
}

/// Evaluates every PNG in `dir` in parallel; the report is sorted by name.
pub fn evaluate_dir(dir: impl AsRef<Path>, dataset: &str, upscaler: &Upscaler<'_>) -> Result<EvalReport> {
    let files = list_pngs(dir)?;
    let scores = files
        .par_iter()
        .map(|path| {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let hr = load_png(path)?;
            score_image(&name, &hr, upscaler).map_err(|e| match e {
                Error::InvalidArgument { .. } | Error::Shape { .. } => Error::Data(format!("{name}: {e}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::new(dataset, upscaler.scale(), scores)
}
