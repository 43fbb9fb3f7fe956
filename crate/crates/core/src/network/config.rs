use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocks::HffbSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub scale: usize,
    pub channels: usize,
    pub n_lffb: usize,
    pub m_hffb: usize,
    pub hfe_enabled: bool,
    pub lfde_enabled: bool,
    pub lffb_enabled: bool,
    pub cca_reduction: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scale: 4,
            channels: 48,
            n_lffb: 6,
            m_hffb: 5,
            hfe_enabled: true,
            lfde_enabled: true,
            lffb_enabled: true,
            cca_reduction: 4,
        }
    }
}

/// Component switched off for an ablation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    None,
    NoHfe,
    NoLfde,
    NoLffb,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "no-hfe" => Ok(Ablation::NoHfe),
            "no-lfde" => Ok(Ablation::NoLfde),
            "no-lffb" => Ok(Ablation::NoLffb),
            other => Err(Error::InvalidConfig(format!(
                "unknown ablation '{other}' (expected none, no-hfe, no-lfde or no-lffb)"
            ))),
        }
    }
}

impl ModelConfig {
    pub fn with_scale(mut self, scale: usize) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        match ablation {
            Ablation::None => {}
            Ablation::NoHfe => self.hfe_enabled = false,
            Ablation::NoLfde => self.lfde_enabled = false,
            Ablation::NoLffb => self.lffb_enabled = false,
        }
        self
    }

    pub fn block_spec(&self) -> HffbSpec {
        HffbSpec {
            channels: self.channels,
            hfe_enabled: self.hfe_enabled,
            lfde_enabled: self.lfde_enabled,
            cca_reduction: self.cca_reduction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.scale, 1..=4) {
            return Err(Error::InvalidConfig(format!("scale must be 1, 2, 3 or 4, got {}", self.scale)));
        }
        if self.n_lffb == 0 || self.m_hffb == 0 {
            return Err(Error::InvalidConfig(format!(
                "need at least one block (n_lffb={}, m_hffb={})",
                self.n_lffb, self.m_hffb
            )));
        }
        self.block_spec().validate()
    }

    /// Stable one-line text form, used in weight files and for the fingerprint.
    pub fn canonical(&self) -> String {
        format!(
            "scale={};channels={};n_lffb={};m_hffb={};hfe={};lfde={};lffb={};cca_reduction={}",
            self.scale,
            self.channels,
            self.n_lffb,
            self.m_hffb,
            self.hfe_enabled as u8,
            self.lfde_enabled as u8,
            self.lffb_enabled as u8,
            self.cca_reduction
        )
    }

    pub fn parse_canonical(text: &str) -> Result<Self> {
        let bad = |why: String| Error::InvalidConfig(format!("bad config string '{text}': {why}"));
        let mut values = [None; 8];
        const KEYS: [&str; 8] = ["scale", "channels", "n_lffb", "m_hffb", "hfe", "lfde", "lffb", "cca_reduction"];
        for field in text.split(';') {
            let (k, v) = field.split_once('=').ok_or_else(|| bad(format!("field '{field}' has no '='")))?;
            let idx = KEYS.iter().position(|&key| key == k).ok_or_else(|| bad(format!("unknown key '{k}'")))?;
            let v: usize = v.parse().map_err(|_| bad(format!("'{v}' is not an integer")))?;
            if values[idx].replace(v).is_some() {
                return Err(bad(format!("duplicate key '{k}'")));
            }
        }
        let get = |i: usize| values[i].ok_or_else(|| bad(format!("missing key '{}'", KEYS[i])));
        let flag = |i: usize| match get(i)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(bad(format!("{} must be 0 or 1, got {v}", KEYS[i]))),
        };
        let cfg = ModelConfig {
            scale: get(0)?,
            channels: get(1)?,
            n_lffb: get(2)?,
            m_hffb: get(3)?,
            hfe_enabled: flag(4)?,
            lfde_enabled: flag(5)?,
            lffb_enabled: flag(6)?,
            cca_reduction: get(7)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// First 8 bytes (little-endian) of the SHA-256 of [`Self::canonical`].
    pub fn fingerprint(&self) -> u64 {
        let digest = Sha256::digest(self.canonical().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}
