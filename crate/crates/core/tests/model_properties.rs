mod common;

use hffn::network::{load_weights, multi_adds, save_weights, self_ensemble, Ablation, Model, ModelConfig};
use hffn::tensor::{Dihedral, Shape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn image(h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random(Shape::new(1, 3, h, w), &mut rng).map(|v| 0.5 + 0.5 * v)
}

#[test]
fn every_ablation_builds_and_runs_at_every_scale() {
    for ablation in [Ablation::None, Ablation::NoHfe, Ablation::NoLfde, Ablation::NoLffb] {
        for scale in 2..=4 {
            let cfg = ModelConfig::default().with_scale(scale).with_ablation(ablation);
            let model = Model::build(&cfg, 0).unwrap();
            let y = model.forward(&image(9, 12, 1)).unwrap();
            assert_eq!(y.shape(), Shape::new(1, 3, 9 * scale, 12 * scale), "{ablation:?} x{scale}");
            assert!(y.data().iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn parameter_count_grows_with_depth() {
    let count = |n, m| Model::build(&ModelConfig { n_lffb: n, m_hffb: m, ..Default::default() }, 0).unwrap().param_count();
    for n in 1..6 {
        assert!(count(n, 5) < count(n + 1, 5));
    }
    for m in 1..7 {
        assert!(count(6, m) < count(6, m + 1));
    }
}

#[test]
fn multi_adds_scale_with_pixel_count() {
    let model = Model::build(&ModelConfig { channels: 16, n_lffb: 2, m_hffb: 2, ..Default::default() }, 0).unwrap();
    let base = multi_adds(&model, 64, 48).unwrap();
    // affine in the pixel count; the constant is the attention on pooled
    // statistics, which does not depend on the image size
    let double = multi_adds(&model, 64, 96).unwrap();
    let quad = multi_adds(&model, 128, 96).unwrap();
    assert_eq!(quad - base, 3 * (double - base));
    assert!(2 * base - double < base / 1000);
    // every weight is applied at most once per LR pixel, transposed convs
    // (upsampling) at most four times
    let lr_pixels = (64 / 4) * (48 / 4) as u64;
    let params = model.param_count() as u64;
    assert!(base < 4 * params * lr_pixels);
    assert!(base > params * lr_pixels / 2);
}

#[test]
fn saved_weights_reproduce_outputs_bit_for_bit() {
    let cfg = ModelConfig { scale: 3, channels: 8, n_lffb: 2, m_hffb: 1, cca_reduction: 2, ..Default::default() };
    let model = Model::build(&cfg, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hffn");
    save_weights(&model, &path).unwrap();
    let loaded = load_weights(&path).unwrap();
    assert_eq!(loaded.config(), model.config());
    let x = image(10, 9, 2);
    // stored as f32: outputs agree with an f32-rounded copy exactly
    let mut rounded = model.clone();
    for t in rounded.params_mut().tensors_mut() {
        *t = t.map(|v| v as f32 as f64);
    }
    assert_eq!(loaded.forward(&x).unwrap(), rounded.forward(&x).unwrap());

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[9] ^= 0xff;
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_weights(&path).is_err());
}

#[test]
fn self_ensemble_of_an_equivariant_map_is_the_map() {
    // nearest-neighbour x2 commutes with flips and quarter turns
    let up = |t: &Tensor| -> hffn::Result<Tensor> {
        let s = t.shape();
        Ok(Tensor::from_fn(s.with_spatial(2 * s.height, 2 * s.width), |n, c, y, x| t.at(n, c, y / 2, x / 2)))
    };
    let x = image(5, 7, 3);
    assert!(self_ensemble(&x, up).unwrap().max_abs_diff(&up(&x).unwrap()).unwrap() <= 1e-15);
}

#[test]
fn self_ensemble_averages_the_eight_views() {
    let model = Model::build(&ModelConfig { scale: 2, channels: 8, n_lffb: 1, m_hffb: 1, cca_reduction: 2, ..Default::default() }, 4)
        .unwrap();
    let x = image(8, 10, 4);
    let mut sum = Tensor::zeros(Shape::new(1, 3, 16, 20));
    for d in Dihedral::all() {
        sum = sum.add(&d.invert(&model.forward(&d.apply(&x)).unwrap())).unwrap();
    }
    let got = model.self_ensemble_forward(&x).unwrap();
    assert!(got.max_abs_diff(&sum.scale(0.125)).unwrap() <= 1e-12);
}

#[test]
fn inputs_below_minimum_size_are_rejected() {
    let model = Model::build(&ModelConfig { channels: 8, n_lffb: 1, m_hffb: 1, cca_reduction: 2, ..Default::default() }, 0).unwrap();
    assert!(model.forward(&image(7, 12, 0)).is_err());
    assert!(model.forward(&Tensor::zeros(Shape::new(1, 4, 8, 8))).is_err());
    assert!(model.forward(&image(8, 8, 0).map(|_| f64::NAN)).is_err());
}
