//! Direct-loop reference implementations used as independent oracles for the
//! optimised tensor kernels, plus a random-shape sweep shared by test targets.
#![allow(dead_code)]

use hffn::autodiff::{Eval, Graph};
use hffn::tensor::{
    conv2d, conv2d_input_grad, conv2d_weight_grad, conv_transpose2d, depthwise_conv2d, depthwise_input_grad,
    depthwise_weight_grad, Shape, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random(shape: Shape, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
}

fn get(t: &Tensor, n: usize, c: usize, y: i64, x: i64) -> f64 {
    let s = t.shape();
    if y < 0 || x < 0 || y >= s.height as i64 || x >= s.width as i64 {
        0.0
    } else {
        t.at(n, c, y as usize, x as usize)
    }
}

pub fn conv2d_ref(x: &Tensor, w: &Tensor, b: Option<&Tensor>, stride: usize, pad: usize) -> Tensor {
    let (xs, ws) = (x.shape(), w.shape());
    let oh = (xs.height + 2 * pad - ws.height) / stride + 1;
    let ow = (xs.width + 2 * pad - ws.width) / stride + 1;
    Tensor::from_fn(Shape::new(xs.batch, ws.batch, oh, ow), |n, o, y, xx| {
        let mut acc = b.map_or(0.0, |b| b.data()[o]);
        for i in 0..ws.channels {
            for ky in 0..ws.height {
                for kx in 0..ws.width {
                    let iy = (y * stride + ky) as i64 - pad as i64;
                    let ix = (xx * stride + kx) as i64 - pad as i64;
                    acc += get(x, n, i, iy, ix) * w.at(o, i, ky, kx);
                }
            }
        }
        acc
    })
}

/// Scatter form: every input pixel deposits `value * kernel` into the output.
pub fn conv_transpose_ref(x: &Tensor, w: &Tensor, b: Option<&Tensor>, stride: usize) -> Tensor {
    let (xs, ws) = (x.shape(), w.shape());
    let oh = (xs.height - 1) * stride + ws.height;
    let ow = (xs.width - 1) * stride + ws.width;
    let mut out = vec![0.0; xs.batch * ws.channels * oh * ow];
    for n in 0..xs.batch {
        for i in 0..xs.channels {
            for y in 0..xs.height {
                for xx in 0..xs.width {
                    for o in 0..ws.channels {
                        for ky in 0..ws.height {
                            for kx in 0..ws.width {
                                let idx = ((n * ws.channels + o) * oh + y * stride + ky) * ow + xx * stride + kx;
                                out[idx] += x.at(n, i, y, xx) * w.at(i, o, ky, kx);
                            }
                        }
                    }
                }
            }
        }
    }
    let t = Tensor::new(Shape::new(xs.batch, ws.channels, oh, ow), out).unwrap();
    match b {
        Some(b) => Tensor::from_fn(t.shape(), |n, c, y, xx| t.at(n, c, y, xx) + b.data()[c]),
        None => t,
    }
}

pub fn depthwise_ref(x: &Tensor, w: &Tensor, b: Option<&Tensor>, pad: usize) -> Tensor {
    let (xs, ws) = (x.shape(), w.shape());
    let oh = xs.height + 2 * pad + 1 - ws.height;
    let ow = xs.width + 2 * pad + 1 - ws.width;
    Tensor::from_fn(Shape::new(xs.batch, xs.channels, oh, ow), |n, c, y, xx| {
        let mut acc = b.map_or(0.0, |b| b.data()[c]);
        for ky in 0..ws.height {
            for kx in 0..ws.width {
                acc += get(x, n, c, (y + ky) as i64 - pad as i64, (xx + kx) as i64 - pad as i64) * w.at(c, 0, ky, kx);
            }
        }
        acc
    })
}

pub fn avg_pool_ref(x: &Tensor, k: usize) -> Tensor {
    let s = x.shape();
    Tensor::from_fn(s.with_spatial(s.height / k, s.width / k), |n, c, y, xx| {
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                acc += x.at(n, c, y * k + i, xx * k + j);
            }
        }
        acc / (k * k) as f64
    })
}

pub fn pixel_shuffle_ref(x: &Tensor, r: usize) -> Tensor {
    let s = x.shape();
    Tensor::from_fn(Shape::new(s.batch, s.channels / (r * r), s.height * r, s.width * r), |n, c, y, xx| {
        x.at(n, c * r * r + (y % r) * r + xx % r, y / r, xx / r)
    })
}

fn reflect(i: usize, len: usize) -> usize {
    if i < len { i } else { 2 * (len - 1) - i }
}

pub fn reflect_pad_ref(x: &Tensor, bottom: usize, right: usize) -> Tensor {
    let s = x.shape();
    Tensor::from_fn(s.with_spatial(s.height + bottom, s.width + right), |n, c, y, xx| {
        x.at(n, c, reflect(y, s.height), reflect(xx, s.width))
    })
}

pub fn contrast_ref(x: &Tensor) -> Tensor {
    let s = x.shape();
    Tensor::from_fn(Shape::new(s.batch, s.channels, 1, 1), |n, c, _, _| {
        let vals: Vec<f64> = (0..s.height).flat_map(|y| (0..s.width).map(move |xx| (y, xx))).map(|(y, xx)| x.at(n, c, y, xx)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        mean + (var + 1e-8).sqrt()
    })
}

/// Largest absolute difference and the number of random cases per op.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub op: &'static str,
    pub cases: usize,
    pub worst: f64,
}

fn diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.max_abs_diff(b).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Compares every tensor kernel with its direct-loop oracle on `cases`
/// random shapes each.
pub fn sweep(cases: usize, seed: u64) -> Vec<OracleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results: Vec<OracleResult> = Vec::new();
    let mut record = |op: &'static str, err: f64| match results.iter_mut().find(|r| r.op == op) {
        Some(r) => {
            r.cases += 1;
            r.worst = r.worst.max(err);
        }
        None => results.push(OracleResult { op, cases: 1, worst: err }),
    };
    for _ in 0..cases {
        let n = rng.random_range(1..3);
        let ci = rng.random_range(1..6);
        let co = rng.random_range(1..6);
        let k = [1, 2, 3, 5][rng.random_range(0..4)];
        let stride = rng.random_range(1..3);
        let pad = rng.random_range(0..=k / 2 + 1);
        let h = rng.random_range(k.max(2)..12);
        let w = rng.random_range(k.max(2)..12);
        let x = random(Shape::new(n, ci, h, w), &mut rng);
        let wt = random(Shape::new(co, ci, k, k), &mut rng);
        let b = random(Shape::new(1, co, 1, 1), &mut rng);
        let bias = if rng.random_bool(0.5) { Some(&b) } else { None };

        let y = conv2d(&x, &wt, bias, stride, pad).unwrap();
        record("conv2d", diff(&y, &conv2d_ref(&x, &wt, bias, stride, pad)));

        let g = random(y.shape(), &mut rng);
        let gi = conv2d_input_grad(&g, &wt, x.shape(), stride, pad).unwrap();
        let gw = conv2d_weight_grad(&x, &g, (k, k), stride, pad).unwrap();
        let lhs = dot(&conv2d_ref(&x, &wt, None, stride, pad), &g);
        record("conv2d adjoint (input)", (lhs - dot(&x, &gi)).abs());
        record("conv2d adjoint (weight)", (lhs - dot(&wt, &gw)).abs());

        let tw = random(Shape::new(ci, co, k, k), &mut rng);
        let tb = random(Shape::new(1, co, 1, 1), &mut rng);
        let tbias = if rng.random_bool(0.5) { Some(&tb) } else { None };
        let t = conv_transpose2d(&x, &tw, tbias, stride).unwrap();
        record("conv_transpose2d", diff(&t, &conv_transpose_ref(&x, &tw, tbias, stride)));

        let dk = [1, 3, 5][rng.random_range(0..3)];
        let dpad = dk / 2;
        let dw = random(Shape::new(ci, 1, dk, dk), &mut rng);
        let db = random(Shape::new(1, ci, 1, 1), &mut rng);
        let dbias = if rng.random_bool(0.5) { Some(&db) } else { None };
        let dx = random(Shape::new(n, ci, h.max(dk), w.max(dk)), &mut rng);
        let d = depthwise_conv2d(&dx, &dw, dbias, dpad).unwrap();
        record("depthwise_conv2d", diff(&d, &depthwise_ref(&dx, &dw, dbias, dpad)));
        let dg = random(d.shape(), &mut rng);
        let dlhs = dot(&depthwise_ref(&dx, &dw, None, dpad), &dg);
        let dgi = depthwise_input_grad(&dg, &dw, dx.shape(), dpad).unwrap();
        let dgw = depthwise_weight_grad(&dx, &dg, (dk, dk), dpad).unwrap();
        record("depthwise adjoint (input)", (dlhs - dot(&dx, &dgi)).abs());
        record("depthwise adjoint (weight)", (dlhs - dot(&dw, &dgw)).abs());

        let pk = rng.random_range(1..4);
        let px = random(Shape::new(n, ci, pk * rng.random_range(1..5), pk * rng.random_range(1..5)), &mut rng);
        record("avg_pool2d", diff(&px.avg_pool2d(pk, pk).unwrap(), &avg_pool_ref(&px, pk)));

        let r = rng.random_range(1..5);
        let sx = random(Shape::new(n, 3 * r * r, rng.random_range(1..6), rng.random_range(1..6)), &mut rng);
        let shuffled = sx.pixel_shuffle(r).unwrap();
        record("pixel_shuffle", diff(&shuffled, &pixel_shuffle_ref(&sx, r)));
        record("pixel_unshuffle", diff(&shuffled.pixel_unshuffle(r).unwrap(), &sx));

        let (pb, pr) = (rng.random_range(0..h - 1), rng.random_range(0..w - 1));
        record("reflect_pad", diff(&x.reflect_pad(pb, pr).unwrap(), &reflect_pad_ref(&x, pb, pr)));

        let mut e = Eval::new();
        let xv = e.input(x.clone());
        let c = e.channel_contrast(&xv).unwrap();
        record("channel_contrast", diff(&c, &contrast_ref(&x)));
        let gate = random(Shape::new(n, ci, 1, 1), &mut rng);
        let gv = e.input(gate.clone());
        let scaled = e.scale_channels(&xv, &gv).unwrap();
        record(
            "scale_channels",
            diff(&scaled, &Tensor::from_fn(x.shape(), |a, b, yy, xx| x.at(a, b, yy, xx) * gate.at(a, b, 0, 0))),
        );
        let sg = e.sigmoid(&xv).unwrap();
        record("sigmoid", diff(&sg, &x.map(|v| 1.0 / (1.0 + (-v).exp()))));
        let lr = e.leaky_relu(&xv, 0.05).unwrap();
        record("leaky_relu", diff(&lr, &x.map(|v| if v >= 0.0 { v } else { 0.05 * v })));

        let cx = random(Shape::new(n, ci + 1, h, w), &mut rng);
        let (lo, hi) = cx.split_channels(rng.random_range(1..=ci)).unwrap();
        record("split/concat channels", diff(&Tensor::concat_channels(&[&lo, &hi]).unwrap(), &cx));
    }
    results
}

/// The miniature network used for the whole-model gradient check.
pub fn miniature_config() -> hffn::network::ModelConfig {
    hffn::network::ModelConfig { scale: 2, channels: 8, n_lffb: 1, m_hffb: 1, cca_reduction: 2, ..Default::default() }
}

/// Result of the whole-model gradient check.
#[derive(Debug, Clone, Copy)]
pub struct ModelGradCheck {
    /// Worst relative error over every parameter coordinate.
    pub worst: f64,
    /// Smallest |input| reaching any leaky ReLU at the checked point.
    pub kink_margin: f64,
    pub params: usize,
}

/// Tape gradients against central differences (step 1e-5) over every
/// parameter of the miniature network, for an L1 loss on an 8x8 input with
/// the target 3 above the output everywhere, far from the L1 kink.
pub fn model_gradient_check(seed: u64) -> ModelGradCheck {
    use hffn::autodiff::{finite_diff_check_params, Tape};
    use hffn::network::Model;

    let mut model = Model::build(&miniature_config(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let ids: Vec<_> = model.params().iter().filter(|(_, n, _)| n.ends_with(".bias")).map(|(id, _, _)| id).collect();
    for id in ids {
        let s = model.params().get(id).shape();
        *model.params_mut().get_mut(id) = random(s, &mut rng).scale(0.1);
    }
    // He-uniform range: keeps every gradient coordinate large enough that
    // central-difference truncation error stays below the relative tolerance
    let ids: Vec<_> = model.params().iter().filter(|(_, n, _)| n.ends_with("weight")).map(|(id, _, _)| id).collect();
    for id in ids {
        let w = model.params().get(id).scale(6f64.sqrt());
        *model.params_mut().get_mut(id) = w;
    }
    let x = random(Shape::new(1, 3, 8, 8), &mut rng).map(|v| 0.5 + 0.5 * v);
    let target = model.forward(&x).unwrap().map(|v| v + 3.0);

    let mut m = Monitored::new();
    let xv = m.input(x.clone());
    model.forward_graph(&mut m, &xv).unwrap();

    let worst = finite_diff_check_params(
        model.params().tensors(),
        |t: &mut Tape, params: &[Tensor]| {
            let mut probe = model.clone();
            probe.params_mut().tensors_mut().clone_from_slice(params);
            let xv = t.input(x.clone());
            let y = probe.forward_graph(t, &xv)?;
            let tv = t.input(target.clone());
            t.l1_loss(y, tv)
        },
        1e-5,
    )
    .unwrap();
    ModelGradCheck { worst, kink_margin: m.kink_margin, params: model.param_count() }
}

/// Seed of the pinned whole-model gradient fixture.
pub const MODEL_GRAD_SEED: u64 = 3;

/// A tape that also records the smallest |input| seen by any leaky ReLU and
/// the smallest channel variance seen by the contrast statistic, so
/// gradient fixtures can prove they sit away from non-smooth points.
pub struct Monitored {
    pub tape: hffn::autodiff::Tape,
    pub kink_margin: f64,
    pub min_variance: f64,
}

impl Monitored {
    pub fn new() -> Self {
        Monitored { tape: hffn::autodiff::Tape::new(), kink_margin: f64::INFINITY, min_variance: f64::INFINITY }
    }
}

mod monitored_impl {
    use hffn::autodiff::{Graph, ParamId, Var};
    use hffn::tensor::{Shape, Tensor};
    use hffn::Result;

    use super::Monitored;

    impl Graph for Monitored {
        type Var = Var;
        fn input(&mut self, value: Tensor) -> Var {
            self.tape.input(value)
        }
        fn param(&mut self, id: ParamId, value: &Tensor) -> Var {
            self.tape.param(id, value)
        }
        fn shape(&self, v: &Var) -> Shape {
            self.tape.shape(v)
        }
        fn conv2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, stride: usize, padding: usize) -> Result<Var> {
            self.tape.conv2d(x, w, b, stride, padding)
        }
        fn conv_transpose2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, stride: usize) -> Result<Var> {
            self.tape.conv_transpose2d(x, w, b, stride)
        }
        fn depthwise_conv2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, padding: usize) -> Result<Var> {
            self.tape.depthwise_conv2d(x, w, b, padding)
        }
        fn avg_pool2d(&mut self, x: &Var, kernel: usize) -> Result<Var> {
            self.tape.avg_pool2d(x, kernel)
        }
        fn pixel_shuffle(&mut self, x: &Var, r: usize) -> Result<Var> {
            self.tape.pixel_shuffle(x, r)
        }
        fn narrow_channels(&mut self, x: &Var, start: usize, len: usize) -> Result<Var> {
            self.tape.narrow_channels(x, start, len)
        }
        fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
            self.tape.concat_channels(parts)
        }
        fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
            self.tape.add(a, b)
        }
        fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
            self.tape.sub(a, b)
        }
        fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
            self.tape.mul(a, b)
        }
        fn scale(&mut self, x: &Var, factor: f64) -> Result<Var> {
            self.tape.scale(x, factor)
        }
        fn sigmoid(&mut self, x: &Var) -> Result<Var> {
            self.tape.sigmoid(x)
        }
        fn leaky_relu(&mut self, x: &Var, slope: f64) -> Result<Var> {
            let m = self.tape.value(*x).data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            self.kink_margin = self.kink_margin.min(m);
            self.tape.leaky_relu(x, slope)
        }
        fn channel_contrast(&mut self, x: &Var) -> Result<Var> {
            let t = self.tape.value(*x);
            let s = t.shape();
            for n in 0..s.batch {
                for c in 0..s.channels {
                    let p = t.plane(n, c);
                    let mean = p.iter().sum::<f64>() / p.len() as f64;
                    let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / p.len() as f64;
                    self.min_variance = self.min_variance.min(var);
                }
            }
            self.tape.channel_contrast(x)
        }
        fn scale_channels(&mut self, x: &Var, gate: &Var) -> Result<Var> {
            self.tape.scale_channels(x, gate)
        }
        fn reflect_pad(&mut self, x: &Var, bottom: usize, right: usize) -> Result<Var> {
            self.tape.reflect_pad(x, bottom, right)
        }
        fn crop(&mut self, x: &Var, height: usize, width: usize) -> Result<Var> {
            self.tape.crop(x, height, width)
        }
    }
}

pub mod fixtures {
    //! Resampling and SSIM results produced offline by numpy, Pillow and
    //! scikit-image (`fixtures/gen_reference.py`).

    use hffn::imaging::{resize_to, ssim, Image};
    use hffn::tensor::{Shape, Tensor};
    use serde::Deserialize;

    #[derive(Deserialize)]
    pub struct ResizeCase {
        pub pattern: String,
        pub height: usize,
        pub width: usize,
        pub scale: f64,
        pub brute: Vec<f64>,
        pub pil: Vec<f64>,
    }

    #[derive(Deserialize)]
    pub struct SsimCase {
        pub a: String,
        pub b: String,
        pub height: usize,
        pub width: usize,
        pub ssim: f64,
    }

    #[derive(Deserialize)]
    pub struct Reference {
        pub resize: Vec<ResizeCase>,
        pub ssim: Vec<SsimCase>,
    }

    pub fn reference() -> Reference {
        serde_json::from_str(include_str!("../fixtures/reference.json")).unwrap()
    }

    pub fn pattern(kind: &str, h: usize, w: usize) -> Tensor {
        let waves = |y: f64, x: f64| 0.5 + 0.35 * (0.37 * x + 0.23 * y).sin() * (0.05 * x * y / 7.0).cos();
        Tensor::from_fn(Shape::new(1, 1, h, w), |_, _, y, x| {
            let (y, x) = (y as f64, x as f64);
            match kind {
                "ramp" => x / (w - 1) as f64,
                "waves" => waves(y, x),
                "waves_noisy" => {
                    (waves(y, x) + 0.12 * (1.3 * x + 2.1 * y).sin() * (0.7 * y).cos()).clamp(0.0, 1.0)
                }
                "checker" => 0.2 + 0.6 * (((x / 3.0).floor() + (y / 2.0).floor()) % 2.0),
                other => panic!("unknown pattern {other}"),
            }
        })
    }

    /// Whether output sample `i` along an axis of input length `n` only
    /// touches input samples that exist, so edge handling cannot matter.
    pub fn interior(i: usize, n: usize, scale: f64) -> bool {
        let c = (i as f64 + 0.5) / scale - 0.5;
        let support = 2.0 / scale.min(1.0);
        c - support > -1.0 && c + support < n as f64
    }

    pub struct ResizeErrors {
        pub cases: usize,
        /// Against the numpy transcription, over the whole image.
        pub brute: f64,
        /// Against Pillow, over samples whose taps never leave the image.
        pub pil_interior: f64,
        pub interior_samples: usize,
    }

    pub fn resize_errors() -> ResizeErrors {
        let mut out = ResizeErrors { cases: 0, brute: 0.0, pil_interior: 0.0, interior_samples: 0 };
        for case in reference().resize {
            let img = pattern(&case.pattern, case.height, case.width);
            let oh = (case.height as f64 * case.scale).ceil() as usize;
            let ow = (case.width as f64 * case.scale).ceil() as usize;
            let got = resize_to(&img, oh, ow, case.scale).unwrap();
            assert_eq!(got.len(), case.brute.len(), "{} {}x{}", case.pattern, case.height, case.width);
            for y in 0..oh {
                for x in 0..ow {
                    let v = got.at(0, 0, y, x);
                    out.brute = out.brute.max((v - case.brute[y * ow + x]).abs());
                    if interior(y, case.height, case.scale) && interior(x, case.width, case.scale) {
                        out.pil_interior = out.pil_interior.max((v - case.pil[y * ow + x]).abs());
                        out.interior_samples += 1;
                    }
                }
            }
            out.cases += 1;
        }
        out
    }

    /// Largest |ours - scikit-image| over the SSIM fixtures.
    pub fn ssim_error() -> (usize, f64) {
        let cases = reference().ssim;
        let worst = cases
            .iter()
            .map(|c| {
                let a = Image::luma(pattern(&c.a, c.height, c.width)).unwrap();
                let b = Image::luma(pattern(&c.b, c.height, c.width)).unwrap();
                (ssim(&a, &b).unwrap() - c.ssim).abs()
            })
            .fold(0.0, f64::max);
        (cases.len(), worst)
    }
}
