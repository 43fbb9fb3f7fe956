use std::collections::BTreeMap;

use super::{contrast_forward, scale_channels_forward, Graph, ParamId, CONTRAST_EPS};
use crate::error::{Error, Result};
use crate::tensor::{self, Shape, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Conv2d { x: Var, w: Var, b: Option<Var>, stride: usize, padding: usize },
    ConvTranspose2d { x: Var, w: Var, b: Option<Var>, stride: usize },
    Depthwise { x: Var, w: Var, b: Option<Var>, padding: usize },
    AvgPool { x: Var, kernel: usize },
    PixelShuffle { x: Var, r: usize },
    Narrow { x: Var, start: usize },
    Concat(Vec<Var>),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Contrast(Var),
    ScaleChannels { x: Var, gate: Var },
    ReflectPad(Var),
    Crop(Var),
    Sum(Var),
    L1 { a: Var, target: Var },
    /// Forward-only value computed outside the tape.
    Opaque { name: String, #[allow(dead_code)] inputs: Vec<Var> },
}

impl Op {
    fn name(&self) -> &str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Conv2d { .. } => "conv2d",
            Op::ConvTranspose2d { .. } => "conv_transpose2d",
            Op::Depthwise { .. } => "depthwise_conv2d",
            Op::AvgPool { .. } => "avg_pool2d",
            Op::PixelShuffle { .. } => "pixel_shuffle",
            Op::Narrow { .. } => "narrow_channels",
            Op::Concat(_) => "concat_channels",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Sigmoid(_) => "sigmoid",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Contrast(_) => "channel_contrast",
            Op::ScaleChannels { .. } => "scale_channels",
            Op::ReflectPad(_) => "reflect_pad",
            Op::Crop(_) => "crop",
            Op::Sum(_) => "sum",
            Op::L1 { .. } => "l1_loss",
            Op::Opaque { name, .. } => name,
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of a forward pass. Nodes are stored in creation order,
/// which is always a topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    params: BTreeMap<ParamId, Tensor>,
    nodes: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    /// Gradient reaching an arbitrary recorded value, if any flowed there.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.params.iter().map(|(k, v)| (*k, v))
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Euclidean norm over all parameter gradients.
    pub fn global_norm(&self) -> f64 {
        self.params.values().flat_map(|t| t.data()).map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest |input| of any recorded leaky ReLU (infinite if none). A
    /// central difference with a step above this may straddle the kink.
    pub fn kink_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::LeakyRelu(x, _) => Some(self.val(&x).data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        value.ensure_finite("tape")?;
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    fn val(&self, v: &Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.val(&x).sum();
        self.push(Op::Sum(x), Tensor::scalar(total))
    }

    /// Mean absolute difference between `a` and `target`.
    pub fn l1_loss(&mut self, a: Var, target: Var) -> Result<Var> {
        let (av, tv) = (self.val(&a), self.val(&target));
        if av.shape() != tv.shape() {
            return Err(Error::shape("l1_loss", format!("{} vs {}", av.shape(), tv.shape())));
        }
        let total: f64 = av.data().iter().zip(tv.data()).map(|(x, y)| (x - y).abs()).sum();
        let loss = total / av.len() as f64;
        self.push(Op::L1 { a, target }, Tensor::scalar(loss))
    }

    /// Records a value produced outside the tape. Gradients cannot flow
    /// through it; [`Tape::backward`] fails if they try.
    pub fn opaque(&mut self, name: impl Into<String>, value: Tensor, inputs: &[Var]) -> Result<Var> {
        self.push(Op::Opaque { name: name.into(), inputs: inputs.to_vec() }, value)
    }

    /// Reverse accumulation from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.val(&loss).shape();
        if shape != Shape::scalar() {
            return Err(Error::NotScalar(shape.to_string()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            for (target, contribution) in self.local_grads(node, &g)? {
                match &mut grads[target.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
            grads[i] = Some(g);
        }

        let mut params = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                let g = grads[i].clone().unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                params
                    .entry(id)
                    .and_modify(|acc: &mut Tensor| acc.add_assign(&g))
                    .or_insert(g);
            }
        }
        Ok(Gradients { params, nodes: grads })
    }

    fn local_grads(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let out = match &node.op {
            Op::Input | Op::Param(_) => vec![],
            Op::Conv2d { x, w, b, stride, padding } => {
                let (xv, wv) = (self.val(x), self.val(w));
                let ws = wv.shape();
                let mut v = vec![
                    (*x, tensor::conv2d_input_grad(g, wv, xv.shape(), *stride, *padding)?),
                    (*w, tensor::conv2d_weight_grad(xv, g, (ws.height, ws.width), *stride, *padding)?),
                ];
                if let Some(b) = b {
                    v.push((*b, bias_grad(g, self.val(b).shape())?));
                }
                v
            }
            Op::ConvTranspose2d { x, w, b, stride } => {
                let (xv, wv) = (self.val(x), self.val(w));
                let ws = wv.shape();
                let mut v = vec![
                    (*x, tensor::conv2d(g, wv, None, *stride, 0)?),
                    (*w, tensor::conv2d_weight_grad(g, xv, (ws.height, ws.width), *stride, 0)?),
                ];
                if let Some(b) = b {
                    v.push((*b, bias_grad(g, self.val(b).shape())?));
                }
                v
            }
            Op::Depthwise { x, w, b, padding } => {
                let (xv, wv) = (self.val(x), self.val(w));
                let ws = wv.shape();
                let mut v = vec![
                    (*x, tensor::depthwise_input_grad(g, wv, xv.shape(), *padding)?),
                    (*w, tensor::depthwise_weight_grad(xv, g, (ws.height, ws.width), *padding)?),
                ];
                if let Some(b) = b {
                    v.push((*b, bias_grad(g, self.val(b).shape())?));
                }
                v
            }
            Op::AvgPool { x, kernel } => {
                vec![(*x, Tensor::avg_pool2d_grad(g, self.val(x).shape(), *kernel)?)]
            }
            Op::PixelShuffle { x, r } => vec![(*x, g.pixel_unshuffle(*r)?)],
            Op::Narrow { x, start } => {
                let s = self.val(x).shape();
                let len = g.shape().channels;
                let mut parts = Vec::new();
                if *start > 0 {
                    parts.push(Tensor::zeros(s.with_channels(*start)));
                }
                parts.push(g.clone());
                if start + len < s.channels {
                    parts.push(Tensor::zeros(s.with_channels(s.channels - start - len)));
                }
                let refs: Vec<&Tensor> = parts.iter().collect();
                vec![(*x, Tensor::concat_channels(&refs)?)]
            }
            Op::Concat(parts) => {
                let mut start = 0;
                let mut v = Vec::with_capacity(parts.len());
                for p in parts {
                    let c = self.val(p).shape().channels;
                    v.push((*p, g.narrow_channels(start, c)?));
                    start += c;
                }
                v
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.scale(-1.0))],
            Op::Mul(a, b) => vec![(*a, g.mul(self.val(b))?), (*b, g.mul(self.val(a))?)],
            Op::Scale(x, f) => vec![(*x, g.scale(*f))],
            Op::Sigmoid(x) => {
                let y = &node.value;
                let d = Tensor::new(
                    y.shape(),
                    y.data().iter().zip(g.data()).map(|(y, g)| g * y * (1.0 - y)).collect(),
                )?;
                vec![(*x, d)]
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.val(x);
                let d = Tensor::new(
                    xv.shape(),
                    xv.data()
                        .iter()
                        .zip(g.data())
                        .map(|(&x, &g)| if x >= 0.0 { g } else { slope * g })
                        .collect(),
                )?;
                vec![(*x, d)]
            }
            Op::Contrast(x) => vec![(*x, contrast_grad(self.val(x), g))],
            Op::ScaleChannels { x, gate } => {
                let (xv, gv) = (self.val(x), self.val(gate));
                let s = xv.shape();
                let dx = scale_channels_forward(g, gv)?;
                let mut dgate = Tensor::zeros(gv.shape());
                for (i, (gp, xp)) in g.data().chunks(s.plane()).zip(xv.data().chunks(s.plane())).enumerate() {
                    dgate.data_mut()[i] = gp.iter().zip(xp).map(|(a, b)| a * b).sum();
                }
                vec![(*x, dx), (*gate, dgate)]
            }
            Op::ReflectPad(x) => vec![(*x, Tensor::reflect_pad_grad(g, self.val(x).shape())?)],
            Op::Crop(x) => vec![(*x, Tensor::crop_grad(g, self.val(x).shape())?)],
            Op::Sum(x) => vec![(*x, Tensor::full(self.val(x).shape(), g.value()?))],
            Op::L1 { a, target } => {
                let (av, tv) = (self.val(a), self.val(target));
                let k = g.value()? / av.len() as f64;
                let d = Tensor::new(
                    av.shape(),
                    av.data().iter().zip(tv.data()).map(|(x, y)| k * sign(x - y)).collect(),
                )?;
                let dt = d.scale(-1.0);
                vec![(*a, d), (*target, dt)]
            }
            Op::Opaque { .. } => return Err(Error::UnsupportedBackward(node.op.name().to_string())),
        };
        Ok(out)
    }
}

/// Subgradient of |x| with 0 at the kink.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn bias_grad(g: &Tensor, shape: Shape) -> Result<Tensor> {
    Tensor::new(shape, g.channel_sums())
}

fn contrast_grad(x: &Tensor, g: &Tensor) -> Tensor {
    let s = x.shape();
    let n = s.plane() as f64;
    let mut out = Tensor::zeros(s);
    for (i, (src, dst)) in x.data().chunks(s.plane()).zip(out.data_mut().chunks_mut(s.plane())).enumerate() {
        let mean = src.iter().sum::<f64>() / n;
        let var = src.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = (var + CONTRAST_EPS).sqrt();
        let go = g.data()[i];
        for (d, v) in dst.iter_mut().zip(src) {
            *d = go * (1.0 / n + (v - mean) / (n * std));
        }
    }
    out
}

impl Graph for Tape {
    type Var = Var;

    fn input(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { op: Op::Input, value });
        Var(self.nodes.len() - 1)
    }

    fn param(&mut self, id: ParamId, value: &Tensor) -> Var {
        self.nodes.push(Node { op: Op::Param(id), value: value.clone() });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: &Var) -> Shape {
        self.val(v).shape()
    }

    fn conv2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, stride: usize, padding: usize) -> Result<Var> {
        let y = tensor::conv2d(self.val(x), self.val(w), b.map(|b| self.val(b)), stride, padding)?;
        self.push(Op::Conv2d { x: *x, w: *w, b: b.copied(), stride, padding }, y)
    }

    fn conv_transpose2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, stride: usize) -> Result<Var> {
        let y = tensor::conv_transpose2d(self.val(x), self.val(w), b.map(|b| self.val(b)), stride)?;
        self.push(Op::ConvTranspose2d { x: *x, w: *w, b: b.copied(), stride }, y)
    }

    fn depthwise_conv2d(&mut self, x: &Var, w: &Var, b: Option<&Var>, padding: usize) -> Result<Var> {
        let y = tensor::depthwise_conv2d(self.val(x), self.val(w), b.map(|b| self.val(b)), padding)?;
        self.push(Op::Depthwise { x: *x, w: *w, b: b.copied(), padding }, y)
    }

    fn avg_pool2d(&mut self, x: &Var, kernel: usize) -> Result<Var> {
        let y = self.val(x).avg_pool2d(kernel, kernel)?;
        self.push(Op::AvgPool { x: *x, kernel }, y)
    }

    fn pixel_shuffle(&mut self, x: &Var, r: usize) -> Result<Var> {
        let y = self.val(x).pixel_shuffle(r)?;
        self.push(Op::PixelShuffle { x: *x, r }, y)
    }

    fn narrow_channels(&mut self, x: &Var, start: usize, len: usize) -> Result<Var> {
        let y = self.val(x).narrow_channels(start, len)?;
        self.push(Op::Narrow { x: *x, start }, y)
    }

    fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor> = parts.iter().map(|p| self.val(p)).collect();
        let y = Tensor::concat_channels(&refs)?;
        self.push(Op::Concat(parts.to_vec()), y)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.val(a).add(self.val(b))?;
        self.push(Op::Add(*a, *b), y)
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.val(a).sub(self.val(b))?;
        self.push(Op::Sub(*a, *b), y)
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = self.val(a).mul(self.val(b))?;
        self.push(Op::Mul(*a, *b), y)
    }

    fn scale(&mut self, x: &Var, factor: f64) -> Result<Var> {
        let y = self.val(x).scale(factor);
        self.push(Op::Scale(*x, factor), y)
    }

    fn sigmoid(&mut self, x: &Var) -> Result<Var> {
        let y = self.val(x).sigmoid();
        self.push(Op::Sigmoid(*x), y)
    }

    fn leaky_relu(&mut self, x: &Var, slope: f64) -> Result<Var> {
        let y = self.val(x).leaky_relu(slope);
        self.push(Op::LeakyRelu(*x, slope), y)
    }

    fn channel_contrast(&mut self, x: &Var) -> Result<Var> {
        let y = contrast_forward(self.val(x));
        self.push(Op::Contrast(*x), y)
    }

    fn scale_channels(&mut self, x: &Var, gate: &Var) -> Result<Var> {
        let y = scale_channels_forward(self.val(x), self.val(gate))?;
        self.push(Op::ScaleChannels { x: *x, gate: *gate }, y)
    }

    fn reflect_pad(&mut self, x: &Var, bottom: usize, right: usize) -> Result<Var> {
        let y = self.val(x).reflect_pad(bottom, right)?;
        self.push(Op::ReflectPad(*x), y)
    }

    fn crop(&mut self, x: &Var, height: usize, width: usize) -> Result<Var> {
        let y = self.val(x).crop(height, width)?;
        self.push(Op::Crop(*x), y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Shape, f: impl Fn(usize) -> f64) -> Tensor {
        Tensor::new(shape, (0..shape.numel()).map(f).collect()).unwrap()
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.input(t(Shape::new(2, 3, 2, 2), |i| i as f64 * 0.3 - 1.0));
        let loss = tape.sum(x).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!(g.wrt(x).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mean_squared_error_gradient() {
        let shape = Shape::new(1, 2, 3, 3);
        let xv = t(shape, |i| (i as f64 * 0.7).sin());
        let yv = t(shape, |i| (i as f64 * 0.3).cos());
        let n = shape.numel() as f64;
        let mut tape = Tape::new();
        let x = tape.input(xv.clone());
        let y = tape.input(yv.clone());
        let d = tape.sub(&x, &y).unwrap();
        let sq = tape.mul(&d, &d).unwrap();
        let s = tape.sum(sq).unwrap();
        let loss = tape.scale(&s, 1.0 / n).unwrap();
        let g = tape.backward(loss).unwrap();
        let expected = xv.sub(&yv).unwrap().scale(2.0 / n);
        assert!(g.wrt(x).unwrap().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn diamond_graph_adds_path_gradients() {
        // loss = sum(x * 3 + sigmoid(x)), two paths from x.
        let xv = t(Shape::new(1, 1, 2, 3), |i| i as f64 * 0.5 - 1.0);
        let mut tape = Tape::new();
        let x = tape.input(xv.clone());
        let a = tape.scale(&x, 3.0).unwrap();
        let b = tape.sigmoid(&x).unwrap();
        let s = tape.add(&a, &b).unwrap();
        let loss = tape.sum(s).unwrap();
        let g = tape.backward(loss).unwrap();
        let expected = xv.map(|v| 3.0 + crate::tensor::sigmoid(v) * (1.0 - crate::tensor::sigmoid(v)));
        assert!(g.wrt(x).unwrap().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn leaky_relu_uses_unit_slope_at_zero() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::new(Shape::new(1, 1, 1, 3), vec![-1.0, 0.0, 1.0]).unwrap());
        let y = tape.leaky_relu(&x, 0.05).unwrap();
        let loss = tape.sum(y).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[0.05, 1.0, 1.0]);
    }

    #[test]
    fn kink_margin_tracks_closest_leaky_input() {
        let mut tape = Tape::new();
        assert_eq!(tape.kink_margin(), f64::INFINITY);
        let x = tape.input(Tensor::new(Shape::new(1, 1, 1, 3), vec![-0.5, 0.25, 2.0]).unwrap());
        let y = tape.leaky_relu(&x, 0.05).unwrap();
        assert_eq!(tape.kink_margin(), 0.25);
        let z = tape.scale(&y, 0.1).unwrap();
        tape.leaky_relu(&z, 0.05).unwrap();
        assert!((tape.kink_margin() - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn l1_subgradient_is_zero_at_ties() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::new(Shape::new(1, 1, 1, 4), vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = tape.input(Tensor::new(Shape::new(1, 1, 1, 4), vec![0.0, 2.0, 5.0, 4.0]).unwrap());
        let loss = tape.l1_loss(a, b).unwrap();
        assert_eq!(tape.value(loss).value().unwrap(), 0.75);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(a).unwrap().data(), &[0.25, 0.0, -0.25, 0.0]);
    }

    #[test]
    fn unused_params_get_zero_gradients() {
        let mut tape = Tape::new();
        let used = tape.param(ParamId(0), &Tensor::full(Shape::new(1, 1, 2, 2), 2.0));
        let _unused = tape.param(ParamId(1), &Tensor::full(Shape::new(1, 3, 1, 1), 1.0));
        let loss = tape.sum(used).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.param_count(), 2);
        let z = g.param(ParamId(1)).unwrap();
        assert_eq!(z.shape(), Shape::new(1, 3, 1, 1));
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_param_accumulates() {
        let w = Tensor::full(Shape::new(1, 1, 1, 2), 1.5);
        let mut tape = Tape::new();
        let a = tape.param(ParamId(0), &w);
        let b = tape.param(ParamId(0), &w);
        let s = tape.mul(&a, &b).unwrap();
        let loss = tape.sum(s).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.param(ParamId(0)).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn rejects_non_scalar_loss_and_opaque_ops() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(Shape::new(1, 1, 2, 2)));
        assert!(matches!(tape.backward(x), Err(Error::NotScalar(_))));
        let y = tape.opaque("external_filter", Tensor::zeros(Shape::new(1, 1, 2, 2)), &[x]).unwrap();
        let loss = tape.sum(y).unwrap();
        match tape.backward(loss) {
            Err(Error::UnsupportedBackward(name)) => assert_eq!(name, "external_filter"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backward_leaves_values_untouched() {
        let mut tape = Tape::new();
        let x = tape.input(t(Shape::new(1, 2, 2, 2), |i| i as f64 - 3.0));
        let y = tape.sigmoid(&x).unwrap();
        let s = tape.mul(&y, &x).unwrap();
        let loss = tape.sum(s).unwrap();
        let before: Vec<Tensor> = (0..tape.len()).map(|i| tape.value(Var(i)).clone()).collect();
        tape.backward(loss).unwrap();
        for (i, v) in before.iter().enumerate() {
            assert_eq!(tape.value(Var(i)), v);
        }
    }
}
