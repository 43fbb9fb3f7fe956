//! Images on disk and in memory, luma conversion, bicubic resampling and
//! the PSNR/SSIM quality metrics.

mod metrics;
mod report;
mod resize;

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

pub use metrics::{gaussian_window, psnr, ssim, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use report::{EvalReport, ImageScore};
pub use resize::{bicubic_kernel, bicubic_resize, resize_to, Factor, BICUBIC_A};

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorSpace {
    Rgb,
    YCbCr,
    Y,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Y => 1,
            ColorSpace::Rgb | ColorSpace::YCbCr => 3,
        }
    }
}

/// A single image with values in `[0, 1]`, stored as a `(1, C, H, W)` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pixels: Tensor,
    colorspace: ColorSpace,
}

impl Image {
    /// Wraps `pixels`, clamping every value into `[0, 1]`.
    pub fn new(pixels: Tensor, colorspace: ColorSpace) -> Result<Image> {
        let s = pixels.shape();
        if s.batch != 1 || s.channels != colorspace.channels() {
            return Err(Error::shape("image", format!("{s} is not a single {colorspace:?} image")));
        }
        if s.height == 0 || s.width == 0 {
            return Err(Error::invalid("image", "empty image"));
        }
        pixels.ensure_finite("image")?;
        Ok(Image { pixels: pixels.map(|v| v.clamp(0.0, 1.0)), colorspace })
    }

    pub fn rgb(pixels: Tensor) -> Result<Image> {
        Image::new(pixels, ColorSpace::Rgb)
    }

    pub fn luma(pixels: Tensor) -> Result<Image> {
        Image::new(pixels, ColorSpace::Y)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.pixels
    }

    pub fn into_tensor(self) -> Tensor {
        self.pixels
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn height(&self) -> usize {
        self.pixels.shape().height
    }

    pub fn width(&self) -> usize {
        self.pixels.shape().width
    }

    /// Crops the bottom/right edges so both sides are multiples of `scale`.
    pub fn mod_crop(&self, scale: usize) -> Result<Image> {
        let (h, w) = (self.height() / scale * scale, self.width() / scale * scale);
        if h == 0 || w == 0 {
            return Err(Error::invalid("mod_crop", format!("{}x{} smaller than scale {scale}", self.height(), self.width())));
        }
        Ok(Image { pixels: self.pixels.crop(h, w)?, colorspace: self.colorspace })
    }

    /// Rounds every value to the nearest 8-bit level (half up).
    pub fn quantized(&self) -> Image {
        Image { pixels: self.pixels.map(|v| to_u8(v) as f64 / 255.0), colorspace: self.colorspace }
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn image_err(path: &Path, detail: impl ToString) -> Error {
    Error::Image { path: path.to_path_buf(), detail: detail.to_string() }
}

/// Reads an 8- or 16-bit PNG. Grey images are expanded to RGB and alpha is
/// dropped.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader.with_guessed_format().map_err(|e| Error::io(path, e))?;
    if reader.format() != Some(image::ImageFormat::Png) {
        return Err(image_err(path, "not a PNG file"));
    }
    let img = reader.decode().map_err(|e| image_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (data, levels): (Vec<f64>, f64) = match img {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            (img.to_rgb8().into_raw().into_iter().map(f64::from).collect(), 255.0)
        }
        DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) | DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => {
            (img.to_rgb16().into_raw().into_iter().map(f64::from).collect(), 65535.0)
        }
        other => return Err(image_err(path, format!("unsupported pixel format {:?}", other.color()))),
    };
    let t = Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| data[(y * w + x) * 3 + c] / levels);
    Image::rgb(t)
}

/// Writes an 8-bit PNG (RGB, or grey for luma images), rounding half up.
pub fn save_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = (image.height(), image.width());
    let t = image.tensor();
    let result = match image.colorspace {
        ColorSpace::Rgb => {
            let buf = ImageBuffer::<Rgb<u8>, _>::from_fn(w as u32, h as u32, |x, y| {
                Rgb(std::array::from_fn(|c| to_u8(t.at(0, c, y as usize, x as usize))))
            });
            buf.save_with_format(path, image::ImageFormat::Png)
        }
        ColorSpace::Y => {
            let buf = ImageBuffer::<Luma<u8>, _>::from_fn(w as u32, h as u32, |x, y| {
                Luma([to_u8(t.at(0, 0, y as usize, x as usize))])
            });
            buf.save_with_format(path, image::ImageFormat::Png)
        }
        ColorSpace::YCbCr => return Err(Error::invalid("save_png", "convert YCbCr images to RGB before saving")),
    };
    result.map_err(|e| image_err(path, e))
}

/// BT.601 studio-swing luma of an RGB image in `[0, 1]`: black maps to
/// 16/255 and white to 235/255.
pub fn rgb_to_y(image: &Image) -> Result<Image> {
    if image.colorspace != ColorSpace::Rgb {
        return Err(Error::invalid("rgb_to_y", format!("expected RGB, got {:?}", image.colorspace)));
    }
    let t = image.tensor();
    let s = t.shape();
    let y = Tensor::from_fn(s.with_channels(1), |_, _, yy, xx| {
        luma(t.at(0, 0, yy, xx), t.at(0, 1, yy, xx), t.at(0, 2, yy, xx))
    });
    Image::luma(y)
}

pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0
}

/// Per-pixel mean of absolute values over channels, then min-max scaled to
/// `[0, 1]`. Returns the map together with the pre-scaling `(min, max)`; a
/// flat map becomes all zeros.
pub fn activation_map(features: &Tensor) -> Result<(Image, f64, f64)> {
    let s = features.shape();
    if s.batch != 1 {
        return Err(Error::shape("activation_map", format!("expected one item, got {s}")));
    }
    let c = s.channels as f64;
    let raw = Tensor::from_fn(s.with_channels(1), |_, _, y, x| {
        (0..s.channels).map(|ch| features.at(0, ch, y, x).abs()).sum::<f64>() / c
    });
    let (lo, hi) = raw.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let map = if range > 0.0 { raw.map(|v| (v - lo) / range) } else { raw.map(|_| 0.0) };
    Ok((Image::luma(map)?, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(h: usize, w: usize, f: impl FnMut(usize, usize, usize, usize) -> f64) -> Image {
        Image::rgb(Tensor::from_fn(Shape::new(1, 3, h, w), f)).unwrap()
    }

    #[test]
    fn luma_endpoints() {
        let white = rgb_to_y(&rgb(2, 2, |_, _, _, _| 1.0)).unwrap();
        let black = rgb_to_y(&rgb(2, 2, |_, _, _, _| 0.0)).unwrap();
        assert!(white.tensor().data().iter().all(|&v| (v - 235.0 / 255.0).abs() < 1e-12));
        assert!(black.tensor().data().iter().all(|&v| (v - 16.0 / 255.0).abs() < 1e-15));
        let y = rgb_to_y(&rgb(1, 1, |_, c, _, _| [0.2, 0.7, 0.4][c])).unwrap();
        let direct = 16.0 / 255.0 + (65.481 * 0.2 + 128.553 * 0.7 + 24.966 * 0.4) / 255.0;
        assert!((y.tensor().data()[0] - direct).abs() < 1e-15);
        assert!(rgb_to_y(&y).is_err());
    }

    #[test]
    fn clamps_and_validates() {
        let img = rgb(1, 2, |_, _, _, x| if x == 0 { -0.5 } else { 1.5 });
        assert_eq!(img.tensor().data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(Image::new(Tensor::zeros(Shape::new(1, 1, 2, 2)), ColorSpace::Rgb).is_err());
        assert!(Image::luma(Tensor::full(Shape::new(1, 1, 2, 2), f64::NAN)).is_err());
    }

    #[test]
    fn known_bytes_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.png");
        let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(2, 2, vec![0, 51, 255, 128, 1, 2, 3, 4, 5, 254, 200, 100]).unwrap();
        buf.save(&path).unwrap();
        let img = load_png(&path).unwrap();
        assert_eq!(img.tensor().at(0, 0, 0, 0), 0.0);
        assert_eq!(img.tensor().at(0, 1, 0, 0), 0.2);
        assert_eq!(img.tensor().at(0, 2, 0, 0), 1.0);
        assert_eq!(img.tensor().at(0, 0, 0, 1), 128.0 / 255.0);
        assert_eq!(img.tensor().at(0, 2, 1, 1), 100.0 / 255.0);
        assert_eq!(img.tensor().at(0, 1, 1, 0), 4.0 / 255.0);
    }

    #[test]
    fn eight_bit_round_trip_and_rounding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = rgb(3, 5, |_, c, y, x| ((c * 31 + y * 17 + x * 53) % 256) as f64 / 255.0);
        save_png(&img, &path).unwrap();
        assert_eq!(load_png(&path).unwrap(), img);

        let half = Image::luma(Tensor::from_fn(Shape::new(1, 1, 1, 3), |_, _, _, x| [0.5, 2.5 / 255.0, 2.49 / 255.0][x])).unwrap();
        save_png(&half, &path).unwrap();
        let back = image::open(&path).unwrap().to_luma8().into_raw();
        assert_eq!(back, vec![128, 3, 2]);
    }

    #[test]
    fn sixteen_bit_is_normalised_and_saved_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        let raw: Vec<u16> = vec![0, 65535, 32896, 257, 32767, 12345];
        ImageBuffer::<Rgb<u16>, _>::from_raw(2, 1, raw.clone()).unwrap().save(&path).unwrap();
        let img = load_png(&path).unwrap();
        assert_eq!(img.tensor().at(0, 1, 0, 0), 1.0);
        assert_eq!(img.tensor().at(0, 2, 0, 0), 32896.0 / 65535.0);
        let out = dir.path().join("o.png");
        save_png(&img, &out).unwrap();
        let bytes = image::open(&out).unwrap().to_rgb8().into_raw();
        let expected: Vec<u8> = raw.iter().map(|&v| (v as f64 / 65535.0 * 255.0 + 0.5).floor() as u8).collect();
        assert_eq!(bytes, expected);
        assert_eq!(expected[2], 128);
    }

    #[test]
    fn grey_png_expands_to_rgb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        ImageBuffer::<Luma<u8>, _>::from_raw(2, 1, vec![10, 20]).unwrap().save(&path).unwrap();
        let img = load_png(&path).unwrap();
        assert_eq!(img.colorspace(), ColorSpace::Rgb);
        assert_eq!(img.tensor().at(0, 2, 0, 1), 20.0 / 255.0);
    }

    #[test]
    fn unreadable_files_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        std::fs::write(&path, b"\x89PNG\r\n\x1a\nshort").unwrap();
        let err = load_png(&path).unwrap_err();
        assert!(err.to_string().contains("bad.png"), "{err}");
        let err = load_png(dir.path().join("none.png")).unwrap_err();
        assert!(err.to_string().contains("none.png"));
    }

    #[test]
    fn activation_map_normalises() {
        let f = Tensor::from_fn(Shape::new(1, 2, 2, 2), |_, c, y, x| if c == 0 { (y * 2 + x) as f64 } else { -((y * 2 + x) as f64) });
        let (map, lo, hi) = activation_map(&f).unwrap();
        assert_eq!((lo, hi), (0.0, 3.0));
        assert_eq!(map.tensor().data(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let (flat, lo, hi) = activation_map(&Tensor::zeros(Shape::new(1, 3, 2, 2))).unwrap();
        assert_eq!((lo, hi), (0.0, 0.0));
        assert!(flat.tensor().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mod_crop_and_quantize() {
        let img = rgb(7, 10, |_, _, y, x| (y * 10 + x) as f64 / 100.0);
        let c = img.mod_crop(3).unwrap();
        assert_eq!((c.height(), c.width()), (6, 9));
        assert!(rgb(2, 2, |_, _, _, _| 0.0).mod_crop(3).is_err());
        let q = img.quantized();
        assert!(q.tensor().data().iter().all(|v| (v * 255.0 - (v * 255.0).round()).abs() < 1e-9));
    }
}
