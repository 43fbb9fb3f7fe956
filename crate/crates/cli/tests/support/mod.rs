#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hffn::imaging::save_png;
use hffn::network::{save_weights, Model, ModelConfig};
use hffn::tensor::{Shape, Tensor};
use hffn::training::synthetic_image;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn hffn<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_hffn")).args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Value after `prefix` on the first stdout line starting with it, up to
/// the next space.
pub fn field(out: &Output, prefix: &str) -> Option<String> {
    stdout(out)
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .map(|rest| rest.split_whitespace().next().unwrap_or("").to_string())
}

/// `count` procedural RGB images of `size` squared, saved as 8-bit PNGs.
pub fn write_pngs(dir: &Path, count: usize, size: usize, seed: u64) -> Vec<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let path = dir.join(format!("img_{i:02}.png"));
            save_png(&synthetic_image(size, size, &mut rng).unwrap(), &path).unwrap();
            path
        })
        .collect()
}

/// A x1 network that returns its input unchanged: the shallow extractor
/// copies RGB into channels 0..3, the global refinement is zeroed so the
/// body contributes nothing, and the head reads channels 0..3 back out.
pub fn identity_model() -> Model {
    let cfg = ModelConfig { scale: 1, channels: 8, n_lffb: 1, m_hffb: 1, cca_reduction: 2, ..ModelConfig::default() };
    let mut model = Model::build(&cfg, 0).unwrap();
    let select = |out_c: usize, in_c: usize| {
        Tensor::from_fn(Shape::new(out_c, in_c, 3, 3), |o, i, y, x| f64::from(o == i && y == 1 && x == 1))
    };
    let (sfe, refine, head) = (model.sfe.clone(), model.global_refine.clone(), model.head.conv.clone());
    let p = model.params_mut();
    *p.get_mut(sfe.weight) = select(8, 3);
    p.get_mut(sfe.bias).data_mut().fill(0.0);
    p.get_mut(refine.weight).data_mut().fill(0.0);
    p.get_mut(refine.bias).data_mut().fill(0.0);
    *p.get_mut(head.weight) = select(3, 8);
    p.get_mut(head.bias).data_mut().fill(0.0);
    model
}

pub fn write_identity_weights(path: &Path) {
    save_weights(&identity_model(), path).unwrap();
}
