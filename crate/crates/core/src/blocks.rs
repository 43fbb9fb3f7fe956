//! The two composite blocks of the network.
//!
//! An [`Hffb`] runs a 1x1 entry conv, splits the channels in half and sends
//! one half through the high-frequency enhancement branch ([`Hfe`]) and the
//! other through the low-frequency de-redundant branch ([`Lfde`]). The
//! branch outputs are concatenated (high first), fused by a 1x1 conv and added
//! back to the block input.
//!
//! An [`Lffb`] chains `m` HFFBs, concatenates every intermediate output,
//! fuses them with a 1x1 conv, gates the result with channel attention and
//! adds the block input.

use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::layers::{Activation, Cca, ConvLayer, DsConv, ParamBuilder, ParamStore, Upsample2x};

/// Width and ablation switches shared by every HFFB of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HffbSpec {
    pub channels: usize,
    pub hfe_enabled: bool,
    pub lfde_enabled: bool,
    pub cca_reduction: usize,
}

impl HffbSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.channels % 4 != 0 {
            return Err(Error::InvalidConfig(format!(
                "channels must be a positive multiple of 4, got {}",
                self.channels
            )));
        }
        if self.cca_reduction == 0 || (self.lfde_enabled && (self.channels / 4) % self.cca_reduction != 0) {
            return Err(Error::InvalidConfig(format!(
                "low-frequency attention width {} not divisible by reduction {}",
                self.channels / 4,
                self.cca_reduction
            )));
        }
        Ok(())
    }
}

/// Intermediate maps of the high-frequency branch.
#[derive(Clone, Debug)]
pub struct HfeMaps<V> {
    /// Branch input.
    pub input: V,
    /// Blurred input: downsample(upsample(input)).
    pub low: V,
    /// `input - low`.
    pub high: V,
    pub output: V,
}

#[derive(Clone, Debug)]
pub struct Hfe {
    pub up: Upsample2x,
    pub conv_a: ConvLayer,
    pub conv_b: ConvLayer,
    pub conv_out: ConvLayer,
    pub channels: usize,
}

impl Hfe {
    pub fn new(pb: &mut ParamBuilder, name: &str, channels: usize) -> Self {
        Hfe {
            up: Upsample2x::new(pb, &format!("{name}.up"), channels),
            conv_a: ConvLayer::new(pb, &format!("{name}.conv_a"), channels, channels, 3, Activation::None),
            conv_b: ConvLayer::new(pb, &format!("{name}.conv_b"), channels, channels, 3, Activation::None),
            conv_out: ConvLayer::new(pb, &format!("{name}.conv_out"), channels, channels, 3, Activation::None),
            channels,
        }
    }

    pub fn param_count(&self) -> usize {
        self.up.param_count() + self.conv_a.param_count() + self.conv_b.param_count() + self.conv_out.param_count()
    }

    pub fn forward_maps<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<HfeMaps<G::Var>> {
        let s = g.shape(x);
        if s.height % 2 != 0 || s.width % 2 != 0 {
            return Err(Error::invalid(
                "hfe_branch",
                format!("spatial size {}x{} must be even", s.height, s.width),
            ));
        }
        let up = self.up.forward(g, p, x)?;
        let low = g.avg_pool2d(&up, 2)?;
        let high = g.sub(x, &low)?;
        let a = self.conv_a.forward(g, p, &high)?;
        let gate_in = g.add(&a, x)?;
        let gate = g.sigmoid(&gate_in)?;
        let b = self.conv_b.forward(g, p, x)?;
        let enhanced = g.mul(&gate, &b)?;
        let output = self.conv_out.forward(g, p, &enhanced)?;
        Ok(HfeMaps { input: x.clone(), low, high, output })
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        Ok(self.forward_maps(g, p, x)?.output)
    }
}

#[derive(Clone, Debug)]
pub struct Lfde {
    pub dsconv: DsConv,
    pub conv: ConvLayer,
    pub cca: Cca,
    /// Width of the input; half of it is processed.
    pub channels: usize,
}

impl Lfde {
    pub fn new(pb: &mut ParamBuilder, name: &str, channels: usize, reduction: usize) -> Result<Self> {
        let half = channels / 2;
        Ok(Lfde {
            dsconv: DsConv::new(pb, &format!("{name}.dsconv"), half),
            conv: ConvLayer::new(pb, &format!("{name}.conv"), half, half, 3, Activation::LeakyRelu),
            cca: Cca::new(pb, &format!("{name}.cca"), half, reduction)?,
            channels,
        })
    }

    pub fn param_count(&self) -> usize {
        self.dsconv.param_count() + self.conv.param_count() + self.cca.param_count()
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let c = g.shape(x).channels;
        if c % 2 != 0 || c != self.channels {
            return Err(Error::invalid(
                "lfde_branch",
                format!("{c} input channels, branch expects {}", self.channels),
            ));
        }
        let (processed, passthrough) = g.split_channels(x, c / 2)?;
        let y = self.dsconv.forward(g, p, &processed)?;
        let y = self.conv.forward(g, p, &y)?;
        let y = self.cca.forward(g, p, &y)?;
        g.concat_channels(&[y, passthrough])
    }
}

/// High-frequency half of an HFFB, or its single-conv ablation.
#[derive(Clone, Debug)]
pub enum HighBranch {
    Enhance(Hfe),
    Plain(ConvLayer),
}

/// Low-frequency half of an HFFB, or its single-conv ablation.
#[derive(Clone, Debug)]
pub enum LowBranch {
    DeRedundant(Lfde),
    Plain(ConvLayer),
}

#[derive(Clone, Debug)]
pub struct Hffb {
    pub entry: ConvLayer,
    pub high: HighBranch,
    pub low: LowBranch,
    pub fuse: ConvLayer,
    pub channels: usize,
}

impl Hffb {
    pub fn new(pb: &mut ParamBuilder, name: &str, spec: &HffbSpec) -> Result<Self> {
        spec.validate()?;
        let c = spec.channels;
        let half = c / 2;
        let entry = ConvLayer::new(pb, &format!("{name}.entry"), c, c, 1, Activation::LeakyRelu);
        let high = if spec.hfe_enabled {
            HighBranch::Enhance(Hfe::new(pb, &format!("{name}.hfe"), half))
        } else {
            HighBranch::Plain(ConvLayer::new(pb, &format!("{name}.hfe_plain"), half, half, 3, Activation::LeakyRelu))
        };
        let low = if spec.lfde_enabled {
            LowBranch::DeRedundant(Lfde::new(pb, &format!("{name}.lfde"), half, spec.cca_reduction)?)
        } else {
            LowBranch::Plain(ConvLayer::new(pb, &format!("{name}.lfde_plain"), half, half, 3, Activation::LeakyRelu))
        };
        let fuse = ConvLayer::new(pb, &format!("{name}.fuse"), c, c, 1, Activation::None);
        Ok(Hffb { entry, high, low, fuse, channels: c })
    }

    pub fn param_count(&self) -> usize {
        let high = match &self.high {
            HighBranch::Enhance(h) => h.param_count(),
            HighBranch::Plain(c) => c.param_count(),
        };
        let low = match &self.low {
            LowBranch::DeRedundant(l) => l.param_count(),
            LowBranch::Plain(c) => c.param_count(),
        };
        self.entry.param_count() + high + low + self.fuse.param_count()
    }

    pub fn hfe(&self) -> Option<&Hfe> {
        match &self.high {
            HighBranch::Enhance(h) => Some(h),
            HighBranch::Plain(_) => None,
        }
    }

    fn check_input<G: Graph>(&self, g: &G, x: &G::Var) -> Result<()> {
        let c = g.shape(x).channels;
        if c != self.channels {
            return Err(Error::shape("hffb", format!("{c} input channels, block expects {}", self.channels)));
        }
        Ok(())
    }

    fn branch_inputs<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<(G::Var, G::Var)> {
        self.check_input(g, x)?;
        let e = self.entry.forward(g, p, x)?;
        g.split_channels(&e, self.channels / 2)
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let (hf, lf) = self.branch_inputs(g, p, x)?;
        let h = match &self.high {
            HighBranch::Enhance(b) => b.forward(g, p, &hf)?,
            HighBranch::Plain(c) => c.forward(g, p, &hf)?,
        };
        let l = match &self.low {
            LowBranch::DeRedundant(b) => b.forward(g, p, &lf)?,
            LowBranch::Plain(c) => c.forward(g, p, &lf)?,
        };
        let cat = g.concat_channels(&[h, l])?;
        let fused = self.fuse.forward(g, p, &cat)?;
        g.add(&fused, x)
    }

    /// Runs only the entry conv and the high-frequency branch, returning its
    /// intermediate maps.
    pub fn hfe_maps<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<HfeMaps<G::Var>> {
        let hfe = self
            .hfe()
            .ok_or_else(|| Error::invalid("decompose", "high-frequency branch disabled in this model"))?;
        let (hf, _) = self.branch_inputs(g, p, x)?;
        hfe.forward_maps(g, p, &hf)
    }
}

#[derive(Clone, Debug)]
pub struct Lffb {
    pub blocks: Vec<Hffb>,
    pub fuse: ConvLayer,
    pub cca: Cca,
    pub channels: usize,
}

impl Lffb {
    pub fn new(pb: &mut ParamBuilder, name: &str, spec: &HffbSpec, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("an LFFB needs at least one HFFB".into()));
        }
        let c = spec.channels;
        let blocks = (0..m)
            .map(|k| Hffb::new(pb, &format!("{name}.hffb.{k}"), spec))
            .collect::<Result<Vec<_>>>()?;
        let fuse = ConvLayer::new(pb, &format!("{name}.fuse"), m * c, c, 1, Activation::None);
        let cca = Cca::new(pb, &format!("{name}.cca"), c, spec.cca_reduction)?;
        Ok(Lffb { blocks, fuse, cca, channels: c })
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(Hffb::param_count).sum::<usize>() + self.fuse.param_count() + self.cca.param_count()
    }

    pub fn forward<G: Graph>(&self, g: &mut G, p: &ParamStore, x: &G::Var) -> Result<G::Var> {
        let mut outputs = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for block in &self.blocks {
            h = block.forward(g, p, &h)?;
            outputs.push(h.clone());
        }
        let cat = g.concat_channels(&outputs)?;
        let fused = self.fuse.forward(g, p, &cat)?;
        let gated = self.cca.forward(g, p, &fused)?;
        g.add(&gated, x)
    }
}
