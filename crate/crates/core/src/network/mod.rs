//! Full network assembly: shallow feature extraction, a chain of LFFBs,
//! global fusion of every LFFB output, and pixel-shuffle reconstruction.

mod budget;
mod config;
mod weights;

use std::rc::Rc;

pub use budget::{multi_adds, multi_adds_breakdown, MacBreakdown, ParamBreakdown, ShapeTracer};
pub use config::{Ablation, ModelConfig};
pub use weights::{load_weights, load_weights_with_config, read_header, save_weights, WeightHeader, WEIGHT_MAGIC, WEIGHT_VERSION};

use crate::autodiff::{Eval, Graph};
use crate::blocks::{HfeMaps, Hffb, HffbSpec, Lffb};
use crate::error::{Error, Result};
use crate::layers::{Activation, ConvLayer, ParamBuilder, ParamStore, ReconstructionHead};
use crate::tensor::{Dihedral, Tensor};

/// Smallest LR height/width accepted by [`Model::forward`].
pub const MIN_INPUT_SIZE: usize = 8;

#[derive(Clone, Debug)]
pub enum Body {
    /// `n` LFFBs of `m` HFFBs each.
    Fused(Vec<Lffb>),
    /// `n * m` HFFBs in a flat chain; every `m`-th output feeds the global
    /// fusion so its width matches the fused layout.
    Flat(Vec<Hffb>),
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    pub sfe: ConvLayer,
    pub body: Body,
    pub global_fuse: ConvLayer,
    pub global_refine: ConvLayer,
    pub head: ReconstructionHead,
}

impl Model {
    /// Builds the layer graph for `config` with weights drawn from `seed`.
    pub fn build(config: &ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let c = config.channels;
        let spec = HffbSpec {
            channels: c,
            hfe_enabled: config.hfe_enabled,
            lfde_enabled: config.lfde_enabled,
            cca_reduction: config.cca_reduction,
        };
        let mut pb = ParamBuilder::new(seed);
        let sfe = ConvLayer::new(&mut pb, "sfe", 3, c, 3, Activation::None);
        let body = if config.lffb_enabled {
            Body::Fused(
                (0..config.n_lffb)
                    .map(|i| Lffb::new(&mut pb, &format!("lffb.{i}"), &spec, config.m_hffb))
                    .collect::<Result<_>>()?,
            )
        } else {
            Body::Flat(
                (0..config.n_lffb * config.m_hffb)
                    .map(|i| Hffb::new(&mut pb, &format!("hffb.{i}"), &spec))
                    .collect::<Result<_>>()?,
            )
        };
        let global_fuse = ConvLayer::new(&mut pb, "global_fuse", config.n_lffb * c, c, 1, Activation::None);
        let global_refine = ConvLayer::new(&mut pb, "global_refine", c, c, 3, Activation::None);
        let head = ReconstructionHead::new(&mut pb, "head", c, config.scale);
        Ok(Model { config: config.clone(), params: pb.finish(), sfe, body, global_fuse, global_refine, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn breakdown(&self) -> ParamBreakdown {
        ParamBreakdown::of(&self.params)
    }

    /// Every HFFB in execution order.
    pub fn hffbs(&self) -> Vec<&Hffb> {
        match &self.body {
            Body::Fused(l) => l.iter().flat_map(|b| b.blocks.iter()).collect(),
            Body::Flat(b) => b.iter().collect(),
        }
    }

    fn check_input(&self, h: usize, w: usize, c: usize) -> Result<()> {
        if c != 3 {
            return Err(Error::shape("forward", format!("expected 3 input channels, got {c}")));
        }
        if h < MIN_INPUT_SIZE || w < MIN_INPUT_SIZE {
            return Err(Error::invalid(
                "forward",
                format!("input {h}x{w} smaller than {MIN_INPUT_SIZE}x{MIN_INPUT_SIZE}"),
            ));
        }
        Ok(())
    }

    fn pad_even<G: Graph>(g: &mut G, x: &G::Var) -> Result<G::Var> {
        let s = g.shape(x);
        let (pb, pr) = (s.height % 2, s.width % 2);
        if pb == 0 && pr == 0 {
            Ok(x.clone())
        } else {
            g.reflect_pad(x, pb, pr)
        }
    }

    /// The complete network on any [`Graph`]. Odd inputs are reflect-padded to
    /// even size and the result is cropped back to `scale` times the input.
    pub fn forward_graph<G: Graph>(&self, g: &mut G, lr: &G::Var) -> Result<G::Var> {
        self.forward_staged(g, lr, |_, _| {})
    }

    /// [`Self::forward_graph`] calling `stage` after each top-level component
    /// (`sfe`, every LFFB or HFFB of the body, `global`, `head`).
    pub fn forward_staged<G: Graph>(&self, g: &mut G, lr: &G::Var, mut stage: impl FnMut(&G, &str)) -> Result<G::Var> {
        let s = g.shape(lr);
        self.check_input(s.height, s.width, s.channels)?;
        let p = &self.params;
        let x = Self::pad_even(g, lr)?;
        let f0 = self.sfe.forward(g, p, &x)?;
        stage(g, "sfe");
        let mut outs = Vec::with_capacity(self.config.n_lffb);
        let mut h = f0.clone();
        match &self.body {
            Body::Fused(lffbs) => {
                for (i, b) in lffbs.iter().enumerate() {
                    h = b.forward(g, p, &h)?;
                    outs.push(h.clone());
                    stage(g, &format!("lffb.{i}"));
                }
            }
            Body::Flat(blocks) => {
                for (i, b) in blocks.iter().enumerate() {
                    h = b.forward(g, p, &h)?;
                    if (i + 1) % self.config.m_hffb == 0 {
                        outs.push(h.clone());
                    }
                    stage(g, &format!("hffb.{i}"));
                }
            }
        }
        let cat = g.concat_channels(&outs)?;
        let fused = self.global_fuse.forward(g, p, &cat)?;
        let fused = self.global_refine.forward(g, p, &fused)?;
        let merged = g.add(&f0, &fused)?;
        stage(g, "global");
        let sr = self.head.forward(g, p, &merged)?;
        stage(g, "head");
        let scale = self.config.scale;
        let out = g.shape(&sr);
        if out.height == s.height * scale && out.width == s.width * scale {
            Ok(sr)
        } else {
            g.crop(&sr, s.height * scale, s.width * scale)
        }
    }

    pub fn forward(&self, lr: &Tensor) -> Result<Tensor> {
        lr.ensure_finite("forward input")?;
        let mut g = Eval::new();
        let x = g.input(lr.clone());
        let y = self.forward_graph(&mut g, &x)?;
        Ok(Rc::try_unwrap(y).unwrap_or_else(|rc| (*rc).clone()))
    }

    /// Average of the outputs for all 8 flips/rotations of the input, each
    /// mapped back to the original orientation.
    pub fn self_ensemble_forward(&self, lr: &Tensor) -> Result<Tensor> {
        self_ensemble(lr, |t| self.forward(t))
    }

    /// Intermediate maps of the high-frequency branch of HFFB `index`
    /// (counted across the whole body), cropped to the input size.
    pub fn hfe_maps(&self, lr: &Tensor, index: usize) -> Result<HfeMaps<Tensor>> {
        let blocks = self.hffbs().len();
        if index >= blocks {
            return Err(Error::invalid("decompose", format!("block {index} out of range (model has {blocks})")));
        }
        lr.ensure_finite("decompose input")?;
        let s = lr.shape();
        self.check_input(s.height, s.width, s.channels)?;
        let p = &self.params;
        let mut g = Eval::new();
        let x = g.input(lr.clone());
        let x = Self::pad_even(&mut g, &x)?;
        let mut h = self.sfe.forward(&mut g, p, &x)?;
        let target = match &self.body {
            Body::Fused(lffbs) => {
                let m = self.config.m_hffb;
                for b in &lffbs[..index / m] {
                    h = b.forward(&mut g, p, &h)?;
                }
                let inner = &lffbs[index / m].blocks;
                for b in &inner[..index % m] {
                    h = b.forward(&mut g, p, &h)?;
                }
                &inner[index % m]
            }
            Body::Flat(blocks) => {
                for b in &blocks[..index] {
                    h = b.forward(&mut g, p, &h)?;
                }
                &blocks[index]
            }
        };
        let maps = target.hfe_maps(&mut g, p, &h)?;
        let crop = |t: Rc<Tensor>| t.crop(s.height, s.width);
        Ok(HfeMaps { input: crop(maps.input)?, low: crop(maps.low)?, high: crop(maps.high)?, output: crop(maps.output)? })
    }
}

/// Runs `f` on every dihedral transform of `input`, undoes each transform on
/// the result and averages the eight outputs.
pub fn self_ensemble<F>(input: &Tensor, f: F) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let mut acc: Option<Tensor> = None;
    for d in Dihedral::all() {
        let y = d.invert(&f(&d.apply(input))?);
        match &mut acc {
            None => acc = Some(y),
            Some(a) => {
                if a.shape() != y.shape() {
                    return Err(Error::shape("self_ensemble", format!("{} vs {}", a.shape(), y.shape())));
                }
                a.add_assign(&y);
            }
        }
    }
    Ok(acc.expect("eight transforms").scale(1.0 / 8.0))
}
