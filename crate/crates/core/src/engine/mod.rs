//! Reference CPU execution of a [`NetworkSpec`]: parameter storage,
//! forward pass (training and inference modes) and reverse-mode gradients.

mod container;
pub(crate) mod ops;

pub use container::*;

use crate::error::{invalid_input, Result};
use crate::netspec::{NetworkSpec, Op};
use crate::tensor::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub const BN_EPS: f32 = 1e-3;
pub const BN_MOMENTUM: f32 = 0.99;
pub const RN_EPS: f32 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Weights {
    tensors: Vec<ParamTensor>,
    index: HashMap<String, usize>,
}

impl Weights {
    pub fn from_tensors(tensors: Vec<ParamTensor>) -> Self {
        let index = tensors.iter().enumerate().map(|(i, t)| (t.name.clone(), i)).collect();
        Weights { tensors, index }
    }

    pub fn tensors(&self) -> &[ParamTensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.index.get(name).copied().map(move |i| &mut self.tensors[i])
    }

    fn data(&self, name: &str) -> Result<&[f32]> {
        self.get(name)
            .map(|t| t.data.as_slice())
            .ok_or_else(|| crate::Error::InvalidInput(format!("missing weight tensor '{name}'")))
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn trainable_count(&self) -> usize {
        self.tensors.iter().filter(|t| t.trainable).map(|t| t.data.len()).sum()
    }

    /// ‖Θ‖² over trainable tensors.
    pub fn sq_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .flat_map(|t| t.data.iter())
            .map(|&v| v as f64 * v as f64)
            .sum()
    }

    /// Glorot-uniform kernels, zero biases, unit BN scale, zero shift,
    /// moving statistics (0, 1).
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        let glorot = |dims: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
            let n: usize = dims.iter().product();
            let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
            (dims, data)
        };
        for node in &spec.graph.nodes {
            let p = |s: &str| format!("{}/{}", node.name, s);
            match node.op {
                Op::Conv2d { kh, kw, cin, cout } => {
                    let (dims, data) = glorot(vec![kh, kw, cin, cout], kh * kw * cin, kh * kw * cout, &mut rng);
                    tensors.push(ParamTensor { name: p("kernel"), dims, data, trainable: true });
                    tensors.push(ParamTensor { name: p("bias"), dims: vec![cout], data: vec![0.0; cout], trainable: true });
                }
                Op::Dense { inp, out } => {
                    let (dims, data) = glorot(vec![inp, out], inp, out, &mut rng);
                    tensors.push(ParamTensor { name: p("kernel"), dims, data, trainable: true });
                    tensors.push(ParamTensor { name: p("bias"), dims: vec![out], data: vec![0.0; out], trainable: true });
                }
                Op::BatchNorm { c } => {
                    tensors.push(ParamTensor { name: p("gamma"), dims: vec![c], data: vec![1.0; c], trainable: true });
                    tensors.push(ParamTensor { name: p("beta"), dims: vec![c], data: vec![0.0; c], trainable: true });
                    tensors.push(ParamTensor { name: p("moving_mean"), dims: vec![c], data: vec![0.0; c], trainable: false });
                    tensors.push(ParamTensor { name: p("moving_var"), dims: vec![c], data: vec![1.0; c], trainable: false });
                }
                _ => {}
            }
        }
        Weights::from_tensors(tensors)
    }

    /// Every tensor the spec needs exists with the right shape.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        let expect = Weights::init(spec, 0);
        for t in expect.tensors() {
            match self.get(&t.name) {
                None => return invalid_input(format!("weights lack tensor '{}'", t.name)),
                Some(w) if w.dims != t.dims => {
                    return invalid_input(format!("tensor '{}' has dims {:?}, spec needs {:?}", t.name, w.dims, t.dims))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in BN, dropout active.
    Train { seed: u64 },
    /// Batch statistics in BN, dropout off. Used to re-estimate moving
    /// statistics after training.
    Calibrate,
    /// Moving statistics, dropout off.
    Infer,
}

enum Aux {
    None,
    Bn { xhat: Vec<f32>, inv: Vec<f32>, mean: Vec<f32>, var: Vec<f32> },
    Rn { xhat: Vec<f32>, inv: Vec<f32> },
    Mask(Vec<f32>),
    ArgMax(Vec<u32>),
}

/// Activations recorded by a forward pass.
pub struct Trace {
    outs: Vec<Option<Tensor>>,
    aux: Vec<Aux>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.outs.last().and_then(|o| o.as_ref()).expect("forward always produces an output")
    }

    pub fn into_output(mut self) -> Tensor {
        self.outs.pop().flatten().expect("forward always produces an output")
    }

    /// `(node index, batch mean, batch variance)` of every BN in the pass.
    pub fn bn_stats(&self) -> Vec<(usize, &[f32], &[f32])> {
        self.aux
            .iter()
            .enumerate()
            .filter_map(|(i, a)| match a {
                Aux::Bn { mean, var, .. } => Some((i, mean.as_slice(), var.as_slice())),
                _ => None,
            })
            .collect()
    }
}

fn channel_major(x: &[f32], c: usize) -> Vec<f32> {
    let m = x.len() / c;
    let mut out = vec![0.0; x.len()];
    for (i, px) in x.chunks(c).enumerate() {
        for (ch, &v) in px.iter().enumerate() {
            out[ch * m + i] = v;
        }
    }
    out
}

fn channel_minor(x: &[f32], c: usize) -> Vec<f32> {
    let m = x.len() / c;
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        for i in 0..m {
            out[i * c + ch] = x[ch * m + i];
        }
    }
    out
}

pub fn forward(spec: &NetworkSpec, w: &Weights, x: &Tensor, mode: Mode) -> Result<Trace> {
    let g = &spec.graph;
    if x.shape != g.input_shape() {
        return invalid_input(format!("input shape {} does not match network input {}", x.shape, g.input_shape()));
    }
    if !x.all_finite() {
        return invalid_input("input contains non-finite values");
    }
    let keep_all = matches!(mode, Mode::Train { .. });
    let mut last_use = vec![0usize; g.nodes.len()];
    for (i, n) in g.nodes.iter().enumerate() {
        for &j in &n.inputs {
            last_use[j] = i;
        }
    }
    let out_id = g.output();
    let mut outs: Vec<Option<Tensor>> = vec![None; g.nodes.len()];
    let mut aux: Vec<Aux> = (0..g.nodes.len()).map(|_| Aux::None).collect();
    outs[0] = Some(x.clone());
    for (i, node) in g.nodes.iter().enumerate().skip(1) {
        let inp = |k: usize| outs[node.inputs[k]].as_ref().expect("topological order");
        let p = |s: &str| format!("{}/{}", node.name, s);
        let y = match node.op {
            Op::Input => unreachable!(),
            Op::Conv2d { kh, kw, cout, .. } => ops::conv2d(inp(0), w.data(&p("kernel"))?, w.data(&p("bias"))?, kh, kw, cout),
            Op::Dense { out, .. } => ops::dense(inp(0), w.data(&p("kernel"))?, w.data(&p("bias"))?, out),
            Op::BatchNorm { c } => {
                let xin = inp(0);
                let gamma = w.data(&p("gamma"))?;
                let beta = w.data(&p("beta"))?;
                let mut y = xin.clone();
                if mode == Mode::Infer {
                    let mm = w.data(&p("moving_mean"))?;
                    let mv = w.data(&p("moving_var"))?;
                    let scale: Vec<f32> = (0..c).map(|k| gamma[k] / (mv[k] + BN_EPS).sqrt()).collect();
                    for px in y.data.chunks_mut(c) {
                        for k in 0..c {
                            px[k] = (px[k] - mm[k]) * scale[k] + beta[k];
                        }
                    }
                } else {
                    let cm = channel_major(&xin.data, c);
                    let m = cm.len() / c;
                    let (xh, inv) = ops::normalize_groups(&cm, m, BN_EPS);
                    let mean: Vec<f32> = cm.chunks(m).map(|g| (g.iter().map(|&v| v as f64).sum::<f64>() / m as f64) as f32).collect();
                    let var: Vec<f32> = inv.iter().map(|is| 1.0 / (is * is) - BN_EPS).map(|v| v.max(0.0)).collect();
                    let xhat = channel_minor(&xh, c);
                    for (o, px) in y.data.chunks_mut(c).zip(xhat.chunks(c)) {
                        for k in 0..c {
                            o[k] = px[k] * gamma[k] + beta[k];
                        }
                    }
                    aux[i] = Aux::Bn { xhat, inv, mean, var };
                }
                y
            }
            Op::Relu => {
                let mut y = inp(0).clone();
                y.data.iter_mut().for_each(|v| *v = v.max(0.0));
                y
            }
            Op::MaxPool { kh, kw, sh, sw } => {
                let r = ops::pool(inp(0), kh, kw, sh, sw, true);
                if keep_all {
                    aux[i] = Aux::ArgMax(r.argmax);
                }
                r.y
            }
            Op::AvgPool { kh, kw, sh, sw } => ops::pool(inp(0), kh, kw, sh, sw, false).y,
            Op::GlobalMaxPool | Op::GlobalAvgPool => {
                let xin = inp(0);
                let c = xin.shape.c;
                let mut y = Tensor::zeros(xin.n, Shape::vector(c));
                let mut arg = vec![0u32; xin.n * c];
                let max = node.op == Op::GlobalMaxPool;
                for n in 0..xin.n {
                    let s = xin.sample(n);
                    for k in 0..c {
                        if max {
                            let (bi, bv) = s.iter().skip(k).step_by(c).enumerate().fold((0, f32::NEG_INFINITY), |a, (j, &v)| if v > a.1 { (j, v) } else { a });
                            y.data[n * c + k] = bv;
                            arg[n * c + k] = (bi * c + k) as u32;
                        } else {
                            y.data[n * c + k] = s.iter().skip(k).step_by(c).sum::<f32>() / (s.len() / c) as f32;
                        }
                    }
                }
                if max && keep_all {
                    aux[i] = Aux::ArgMax(arg);
                }
                y
            }
            Op::GlobalAvgPoolFreq => {
                let xin = inp(0);
                let s = xin.shape;
                let mut y = Tensor::zeros(xin.n, node.shape);
                for n in 0..xin.n {
                    let xs = xin.sample(n);
                    let o = y.sample_mut(n);
                    for h in 0..s.h {
                        for (a, v) in o.iter_mut().zip(&xs[h * s.w * s.c..(h + 1) * s.w * s.c]) {
                            *a += v;
                        }
                    }
                    o.iter_mut().for_each(|v| *v /= s.h as f32);
                }
                y
            }
            Op::GlobalMaxPoolTime => {
                let xin = inp(0);
                let s = xin.shape;
                let mut y = Tensor::zeros(xin.n, node.shape);
                let mut arg = vec![0u32; xin.n * node.shape.len()];
                for n in 0..xin.n {
                    let xs = xin.sample(n);
                    for h in 0..s.h {
                        for c in 0..s.c {
                            let mut best = f32::NEG_INFINITY;
                            let mut bi = 0;
                            for t in 0..s.w {
                                let j = (h * s.w + t) * s.c + c;
                                if xs[j] > best {
                                    best = xs[j];
                                    bi = j;
                                }
                            }
                            let o = n * node.shape.len() + h * s.c + c;
                            y.data[o] = best;
                            arg[o] = bi as u32;
                        }
                    }
                }
                if keep_all {
                    aux[i] = Aux::ArgMax(arg);
                }
                y
            }
            Op::ChannelAvgPool => {
                let xin = inp(0);
                let c = xin.shape.c;
                let data = xin.data.chunks(c).map(|px| px.iter().sum::<f32>() / c as f32).collect();
                Tensor::from_vec(xin.n, node.shape, data)?
            }
            Op::Flatten => {
                let xin = inp(0);
                Tensor { n: xin.n, shape: node.shape, data: xin.data.clone() }
            }
            Op::Dropout { rate } => {
                let xin = inp(0);
                match mode {
                    Mode::Train { seed } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f32> = (0..xin.data.len()).map(|_| if rng.random::<f32>() >= rate { keep } else { 0.0 }).collect();
                        let data = xin.data.iter().zip(&mask).map(|(a, b)| a * b).collect();
                        aux[i] = Aux::Mask(mask);
                        Tensor { n: xin.n, shape: xin.shape, data }
                    }
                    _ => xin.clone(),
                }
            }
            Op::Softmax => ops::softmax_rows(inp(0)),
            Op::ResidualNorm { lambda } => {
                let xin = inp(0);
                let group = xin.shape.w * xin.shape.c;
                let (xhat, inv) = ops::normalize_groups(&xin.data, group, RN_EPS);
                let data = xin.data.iter().zip(&xhat).map(|(a, b)| lambda * a + b).collect();
                if keep_all {
                    aux[i] = Aux::Rn { xhat, inv };
                }
                Tensor { n: xin.n, shape: xin.shape, data }
            }
            Op::Concat => {
                let parts: Vec<&Tensor> = (0..node.inputs.len()).map(inp).collect();
                let c_out = node.shape.c;
                let px = node.shape.h * node.shape.w;
                let n = parts[0].n;
                let mut data = vec![0.0f32; n * px * c_out];
                let mut off = 0;
                for t in parts {
                    let c = t.shape.c;
                    for (dst, src) in data.chunks_mut(c_out).zip(t.data.chunks(c)) {
                        dst[off..off + c].copy_from_slice(src);
                    }
                    off += c;
                }
                Tensor { n, shape: node.shape, data }
            }
            Op::Add => {
                let mut y = inp(0).clone();
                for k in 1..node.inputs.len() {
                    for (a, b) in y.data.iter_mut().zip(&inp(k).data) {
                        *a += b;
                    }
                }
                y
            }
            Op::ChannelSlice { start, len } => {
                let xin = inp(0);
                let c = xin.shape.c;
                let data = xin.data.chunks(c).flat_map(|px| px[start..start + len].iter().copied()).collect();
                Tensor { n: xin.n, shape: node.shape, data }
            }
        };
        outs[i] = Some(y);
        if !keep_all {
            for &j in &node.inputs {
                if last_use[j] == i && j != out_id {
                    outs[j] = None;
                }
            }
        }
    }
    Ok(Trace { outs, aux })
}

/// Inference-mode class probabilities.
pub fn predict(spec: &NetworkSpec, w: &Weights, x: &Tensor) -> Result<Tensor> {
    Ok(forward(spec, w, x, Mode::Infer)?.into_output())
}

/// Gradients of a scalar loss with respect to every trainable tensor, given
/// the gradient at the network output. The result is aligned with
/// `w.tensors()`; non-trainable entries are empty.
pub fn backward(spec: &NetworkSpec, w: &Weights, trace: &Trace, grad_out: Tensor) -> Result<Vec<Vec<f32>>> {
    let g = &spec.graph;
    let mut grads: Vec<Vec<f32>> = w
        .tensors()
        .iter()
        .map(|t| if t.trainable { vec![0.0; t.data.len()] } else { Vec::new() })
        .collect();
    let mut dys: Vec<Option<Tensor>> = vec![None; g.nodes.len()];
    dys[g.output()] = Some(grad_out);
    let acc = |dys: &mut Vec<Option<Tensor>>, j: usize, t: Tensor| match &mut dys[j] {
        Some(e) => e.data.iter_mut().zip(&t.data).for_each(|(a, b)| *a += b),
        slot => *slot = Some(t),
    };
    for i in (1..g.nodes.len()).rev() {
        let Some(dy) = dys[i].take() else { continue };
        let node = &g.nodes[i];
        let xin = |k: usize| trace.outs[node.inputs[k]].as_ref().ok_or_else(|| crate::Error::Runtime("trace was not recorded in training mode".into()));
        let yout = trace.outs[i].as_ref();
        let p = |s: &str| format!("{}/{}", node.name, s);
        let pos = |s: &str| w.position(&p(s)).ok_or_else(|| crate::Error::InvalidInput(format!("missing weight tensor '{}'", p(s))));
        match node.op {
            Op::Input => {}
            Op::Conv2d { kh, kw, cout, .. } => {
                let (ki, bi) = (pos("kernel")?, pos("bias")?);
                let mut dk = std::mem::take(&mut grads[ki]);
                let mut db = std::mem::take(&mut grads[bi]);
                let dx = ops::conv2d_backward(xin(0)?, &w.tensors[ki].data, kh, kw, cout, &dy, &mut dk, &mut db);
                grads[ki] = dk;
                grads[bi] = db;
                acc(&mut dys, node.inputs[0], dx);
            }
            Op::Dense { out, .. } => {
                let (ki, bi) = (pos("kernel")?, pos("bias")?);
                let mut dk = std::mem::take(&mut grads[ki]);
                let mut db = std::mem::take(&mut grads[bi]);
                let dx = ops::dense_backward(xin(0)?, &w.tensors[ki].data, out, &dy, &mut dk, &mut db);
                grads[ki] = dk;
                grads[bi] = db;
                acc(&mut dys, node.inputs[0], dx);
            }
            Op::BatchNorm { c } => {
                let Aux::Bn { xhat, inv, .. } = &trace.aux[i] else {
                    return Err(crate::Error::Runtime("batch norm backward needs a training-mode trace".into()));
                };
                let (gi, bi) = (pos("gamma")?, pos("beta")?);
                let gamma = &w.tensors[gi].data;
                for (px, xh) in dy.data.chunks(c).zip(xhat.chunks(c)) {
                    for k in 0..c {
                        grads[gi][k] += px[k] * xh[k];
                        grads[bi][k] += px[k];
                    }
                }
                let dxhat: Vec<f32> = dy.data.iter().enumerate().map(|(j, v)| v * gamma[j % c]).collect();
                let m = dy.data.len() / c;
                let dx_cm = ops::normalize_groups_backward(&channel_major(xhat, c), inv, &channel_major(&dxhat, c), m);
                acc(&mut dys, node.inputs[0], Tensor { n: dy.n, shape: dy.shape, data: channel_minor(&dx_cm, c) });
            }
            Op::Relu => {
                let y = yout.ok_or_else(|| crate::Error::Runtime("missing activation".into()))?;
                let data = dy.data.iter().zip(&y.data).map(|(d, v)| if *v > 0.0 { *d } else { 0.0 }).collect();
                acc(&mut dys, node.inputs[0], Tensor { n: dy.n, shape: dy.shape, data });
            }
            Op::MaxPool { .. } | Op::GlobalMaxPool | Op::GlobalMaxPoolTime => {
                let Aux::ArgMax(arg) = &trace.aux[i] else {
                    return Err(crate::Error::Runtime("max pool backward needs a training-mode trace".into()));
                };
                let x = xin(0)?;
                acc(&mut dys, node.inputs[0], ops::maxpool_backward(x.shape, x.n, arg, &dy));
            }
            Op::AvgPool { kh, kw, sh, sw } => {
                let x = xin(0)?;
                acc(&mut dys, node.inputs[0], ops::avgpool_backward(x.shape, kh, kw, sh, sw, &dy));
            }
            Op::GlobalAvgPool => {
                let x = xin(0)?;
                let c = x.shape.c;
                let cells = (x.shape.h * x.shape.w) as f32;
                let mut dx = Tensor::zeros(x.n, x.shape);
                for n in 0..x.n {
                    let g = &dy.data[n * c..(n + 1) * c];
                    for px in dx.sample_mut(n).chunks_mut(c) {
                        for k in 0..c {
                            px[k] = g[k] / cells;
                        }
                    }
                }
                acc(&mut dys, node.inputs[0], dx);
            }
            Op::GlobalAvgPoolFreq => {
                let x = xin(0)?;
                let s = x.shape;
                let mut dx = Tensor::zeros(x.n, s);
                for n in 0..x.n {
                    let g = dy.sample(n).to_vec();
                    let d = dx.sample_mut(n);
                    for h in 0..s.h {
                        for (a, v) in d[h * s.w * s.c..(h + 1) * s.w * s.c].iter_mut().zip(&g) {
                            *a = v / s.h as f32;
                        }
                    }
                }
                acc(&mut dys, node.inputs[0], dx);
            }
            Op::ChannelAvgPool => {
                let x = xin(0)?;
                let c = x.shape.c;
                let data = dy.data.iter().flat_map(|&v| std::iter::repeat_n(v / c as f32, c)).collect();
                acc(&mut dys, node.inputs[0], Tensor { n: x.n, shape: x.shape, data });
            }
            Op::Flatten => {
                let x = xin(0)?;
                acc(&mut dys, node.inputs[0], Tensor { n: x.n, shape: x.shape, data: dy.data });
            }
            Op::Dropout { .. } => {
                let data = match &trace.aux[i] {
                    Aux::Mask(m) => dy.data.iter().zip(m).map(|(a, b)| a * b).collect(),
                    _ => dy.data,
                };
                acc(&mut dys, node.inputs[0], Tensor { n: dy.n, shape: dy.shape, data });
            }
            Op::Softmax => {
                let y = yout.ok_or_else(|| crate::Error::Runtime("missing activation".into()))?;
                let c = y.shape.c;
                let mut data = vec![0.0f32; y.data.len()];
                for ((o, yr), gr) in data.chunks_mut(c).zip(y.data.chunks(c)).zip(dy.data.chunks(c)) {
                    let dot: f32 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for k in 0..c {
                        o[k] = yr[k] * (gr[k] - dot);
                    }
                }
                acc(&mut dys, node.inputs[0], Tensor { n: y.n, shape: y.shape, data });
            }
            Op::ResidualNorm { lambda } => {
                let Aux::Rn { xhat, inv } = &trace.aux[i] else {
                    return Err(crate::Error::Runtime("residual norm backward needs a training-mode trace".into()));
                };
                let group = dy.shape.w * dy.shape.c;
                let dn = ops::normalize_groups_backward(xhat, inv, &dy.data, group);
                let data = dy.data.iter().zip(&dn).map(|(a, b)| lambda * a + b).collect();
                acc(&mut dys, node.inputs[0], Tensor { n: dy.n, shape: dy.shape, data });
            }
            Op::Concat => {
                let c_out = node.shape.c;
                let mut off = 0;
                for k in 0..node.inputs.len() {
                    let x = xin(k)?;
                    let c = x.shape.c;
                    let data = dy.data.chunks(c_out).flat_map(|px| px[off..off + c].iter().copied()).collect();
                    off += c;
                    acc(&mut dys, node.inputs[k], Tensor { n: x.n, shape: x.shape, data });
                }
            }
            Op::Add => {
                for &j in &node.inputs {
                    acc(&mut dys, j, dy.clone());
                }
            }
            Op::ChannelSlice { start, len } => {
                let x = xin(0)?;
                let c = x.shape.c;
                let mut dx = Tensor::zeros(x.n, x.shape);
                for (d, s) in dx.data.chunks_mut(c).zip(dy.data.chunks(len)) {
                    d[start..start + len].copy_from_slice(s);
                }
                acc(&mut dys, node.inputs[0], dx);
            }
        }
    }
    Ok(grads)
}

/// Exponential moving update of BN statistics from a training trace.
pub fn update_bn_moving(spec: &NetworkSpec, w: &mut Weights, trace: &Trace, momentum: f32) {
    for (i, mean, var) in trace.bn_stats() {
        let name = &spec.graph.nodes[i].name;
        if let Some(t) = w.get_mut(&format!("{name}/moving_mean")) {
            t.data.iter_mut().zip(mean).for_each(|(m, &b)| *m = momentum * *m + (1.0 - momentum) * b);
        }
        if let Some(t) = w.get_mut(&format!("{name}/moving_var")) {
            t.data.iter_mut().zip(var).for_each(|(m, &b)| *m = momentum * *m + (1.0 - momentum) * b);
        }
    }
}
