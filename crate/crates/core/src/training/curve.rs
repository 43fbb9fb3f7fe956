use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};

/// Mean of `losses[start..start + len]`.
pub fn window_mean(losses: &[f64], start: usize, len: usize) -> Result<f64> {
    let w = losses
        .get(start..start + len)
        .filter(|w| !w.is_empty())
        .ok_or_else(|| Error::invalid("window_mean", format!("window {start}+{len} outside {} losses", losses.len())))?;
    Ok(w.iter().sum::<f64>() / len as f64)
}

/// Writes a `step,loss` CSV.
pub fn write_curve_csv(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["step", "loss"]).map_err(to_err)?;
    for (i, l) in losses.iter().enumerate() {
        w.serialize((i, l)).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Draws the loss curve as a simple line plot.
pub fn render_curve_png(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    let path = path.as_ref();
    const W: u32 = 640;
    const H: u32 = 360;
    const M: u32 = 20;
    let mut img = ImageBuffer::from_pixel(W, H, Rgb([255u8, 255, 255]));
    for x in M..W - M {
        img.put_pixel(x, H - M, Rgb([0, 0, 0]));
    }
    for y in M..=H - M {
        img.put_pixel(M, y, Rgb([0, 0, 0]));
    }
    let (lo, hi) = losses.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if losses.len() >= 2 && hi.is_finite() {
        let span = if hi > lo { hi - lo } else { 1.0 };
        let px = |i: usize| M as f64 + (W - 2 * M) as f64 * i as f64 / (losses.len() - 1) as f64;
        let py = |v: f64| (H - M) as f64 - (H - 2 * M) as f64 * (v - lo) / span;
        for i in 1..losses.len() {
            let (x0, y0, x1, y1) = (px(i - 1), py(losses[i - 1]), px(i), py(losses[i]));
            let n = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
            for k in 0..=n {
                let t = k as f64 / n as f64;
                let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
                img.put_pixel((x.round() as u32).min(W - 1), (y.round() as u32).min(H - 1), Rgb([200, 30, 30]));
            }
        }
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image { path: path.to_path_buf(), detail: e.to_string() })
}
