//! Binary weight files.
//!
//! Layout (little-endian): magic `HFFN`, format version `u32`, config
//! fingerprint `u64`, parameter count `u64`, config string length `u32` and
//! its UTF-8 bytes, then every parameter as `f32` in construction order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Model, ModelConfig};

pub const WEIGHT_MAGIC: [u8; 4] = *b"HFFN";
pub const WEIGHT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightHeader {
    pub version: u32,
    pub fingerprint: u64,
    pub param_count: u64,
    pub config: ModelConfig,
}

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::WeightFormat { path: path.to_path_buf(), detail: detail.into() }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

fn parse_header(path: &Path, r: &mut Reader<'_>) -> Result<WeightHeader> {
    let truncated = || format_err(path, "file truncated inside header");
    if r.take(4).ok_or_else(truncated)? != WEIGHT_MAGIC {
        return Err(format_err(path, "not an HFFN weight file (bad magic)"));
    }
    let version = r.u32().ok_or_else(truncated)?;
    if version != WEIGHT_VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }
    let fingerprint = r.u64().ok_or_else(truncated)?;
    let param_count = r.u64().ok_or_else(truncated)?;
    let len = r.u32().ok_or_else(truncated)? as usize;
    let text = std::str::from_utf8(r.take(len).ok_or_else(truncated)?)
        .map_err(|_| format_err(path, "config string is not UTF-8"))?;
    let config = ModelConfig::parse_canonical(text).map_err(|e| format_err(path, e.to_string()))?;
    if config.fingerprint() != fingerprint {
        return Err(format_err(path, "stored fingerprint does not match stored config"));
    }
    Ok(WeightHeader { version, fingerprint, param_count, config })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_header(path: impl AsRef<Path>) -> Result<WeightHeader> {
    let path = path.as_ref();
    let bytes = read(path)?;
    parse_header(path, &mut Reader { bytes: &bytes, pos: 0 })
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let cfg = model.config().canonical();
    let count = model.param_count();
    let mut out = Vec::with_capacity(32 + cfg.len() + 4 * count);
    out.extend_from_slice(&WEIGHT_MAGIC);
    out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.config().fingerprint().to_le_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(cfg.as_bytes());
    for t in model.params().tensors() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn fill(model: &mut Model, path: &Path, r: &mut Reader<'_>, header: &WeightHeader) -> Result<()> {
    if header.param_count != model.param_count() as u64 {
        return Err(format_err(
            path,
            format!("file holds {} parameters, model has {}", header.param_count, model.param_count()),
        ));
    }
    for t in model.params_mut().tensors_mut() {
        let n = t.len();
        let raw = r
            .take(4 * n)
            .ok_or_else(|| format_err(path, "file truncated inside parameter data"))?;
        for (dst, chunk) in t.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
            if !v.is_finite() {
                return Err(format_err(path, "non-finite parameter value"));
            }
            *dst = v as f64;
        }
    }
    if r.pos != r.bytes.len() {
        return Err(format_err(path, format!("{} trailing bytes after parameters", r.bytes.len() - r.pos)));
    }
    Ok(())
}

/// Builds the model described by the file header and loads its weights.
pub fn load_weights(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let header = parse_header(path, &mut r)?;
    let mut model = Model::build(&header.config, 0)?;
    fill(&mut model, path, &mut r, &header)?;
    Ok(model)
}

/// Loads weights for an expected `config`; a file written for any other
/// configuration is rejected.
pub fn load_weights_with_config(config: &ModelConfig, path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let header = parse_header(path, &mut r)?;
    if header.fingerprint != config.fingerprint() {
        return Err(format_err(
            path,
            format!("weights are for config [{}], expected [{}]", header.config, config),
        ));
    }
    let mut model = Model::build(config, 0)?;
    fill(&mut model, path, &mut r, &header)?;
    Ok(model)
}
