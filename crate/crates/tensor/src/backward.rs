//! Reverse-mode gradient computation.
//!
//! `Tape::trace` linearizes the gradient-relevant subgraph reachable from a
//! loss into topological order (every node after all of its inputs); the
//! backward walk then visits it in reverse, pushing each node's gradient into
//! its parents via the chain rule.

use std::collections::HashSet;

use crate::error::{Result, TensorError};
use crate::loss::PROB_EPS;
use crate::op::Op;
use crate::shape::{broadcast_strides, for_each_broadcast, reduce_grad};
use crate::tensor::Tensor;

/// Topologically ordered record of the operations behind a tensor.
pub struct Tape {
    nodes: Vec<Tensor>,
}

impl Tape {
    /// Post-order trace from `root`. Subgraphs that do not require gradients
    /// are not descended into; their roots appear as leaves.
    pub fn trace(root: &Tensor) -> Tape {
        let mut nodes = Vec::new();
        let mut visited = HashSet::new();
        let mut stack = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                nodes.push(t);
                continue;
            }
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if t.requires_grad_flag() {
                if let Some(op) = t.op() {
                    for p in op.parents() {
                        if !visited.contains(&p.id()) {
                            stack.push((p.clone(), false));
                        }
                    }
                }
            }
        }
        Tape { nodes }
    }

    pub fn nodes(&self) -> &[Tensor] {
        &self.nodes
    }
}

impl Tensor {
    /// Populates `grad` on every tensor in this loss's graph that requires
    /// gradients. Errors unless the loss is a scalar.
    pub fn backward(&self) -> Result<()> {
        backward(self)
    }
}

pub fn backward(loss: &Tensor) -> Result<()> {
    if loss.numel() != 1 {
        return Err(TensorError::NotScalar {
            shape: loss.shape().to_vec(),
        });
    }
    let tape = Tape::trace(loss);
    loss.seed_grad_ones();
    for node in tape.nodes().iter().rev() {
        if !node.requires_grad_flag() {
            continue;
        }
        let Some(op) = node.op() else { continue };
        let g = match node.grad() {
            Some(g) => g,
            None => continue, // no path contributed gradient
        };
        apply_op_backward(node, op, &g);
    }
    Ok(())
}

/// Accumulates `g` into `target` through the broadcast that produced
/// `out_shape`, multiplying each element by `factor(other operand element)`.
fn binary_grad(
    out_shape: &[usize],
    g: &[f32],
    target: &Tensor,
    other_shape: &[usize],
    factor: impl Fn(usize, usize) -> f32,
) {
    if !target.requires_grad_flag() {
        return;
    }
    let mut acc = vec![0f32; target.numel()];
    for_each_broadcast(out_shape, target.shape(), other_shape, |oi, ti, vi| {
        acc[ti] += g[oi] * factor(oi, vi);
    });
    target.accumulate_grad(&acc);
}

fn apply_op_backward(node: &Tensor, op: &Op, g: &[f32]) {
    let out_shape = node.shape();
    match op {
        Op::Add(a, b) => {
            if a.requires_grad_flag() {
                a.accumulate_grad(&reduce_grad(g, out_shape, a.shape()));
            }
            if b.requires_grad_flag() {
                b.accumulate_grad(&reduce_grad(g, out_shape, b.shape()));
            }
        }
        Op::Sub(a, b) => {
            if a.requires_grad_flag() {
                a.accumulate_grad(&reduce_grad(g, out_shape, a.shape()));
            }
            if b.requires_grad_flag() {
                let neg: Vec<f32> = g.iter().map(|v| -v).collect();
                b.accumulate_grad(&reduce_grad(&neg, out_shape, b.shape()));
            }
        }
        Op::Mul(a, b) => {
            let (ad, bd) = (a.data(), b.data());
            binary_grad(out_shape, g, a, b.shape(), |_, bi| bd[bi]);
            binary_grad(out_shape, g, b, a.shape(), |_, ai| ad[ai]);
        }
        Op::Div(a, b) => {
            let (ad, bd) = (a.data(), b.data());
            binary_grad(out_shape, g, a, b.shape(), |_, bi| 1.0 / bd[bi]);
            // d(a/b)/db = -a/b^2
            if b.requires_grad_flag() {
                let mut acc = vec![0f32; b.numel()];
                for_each_broadcast(out_shape, b.shape(), a.shape(), |oi, bi, ai| {
                    acc[bi] -= g[oi] * ad[ai] / (bd[bi] * bd[bi]);
                });
                b.accumulate_grad(&acc);
            }
        }
        Op::AddScalar(a) => a.accumulate_grad(g),
        Op::MulScalar(a, s) => {
            let d: Vec<f32> = g.iter().map(|v| v * s).collect();
            a.accumulate_grad(&d);
        }
        Op::Neg(a) => {
            let d: Vec<f32> = g.iter().map(|v| -v).collect();
            a.accumulate_grad(&d);
        }
        Op::Sqrt(a) => {
            let y = node.data();
            let d: Vec<f32> = g.iter().zip(y.iter()).map(|(gv, yv)| gv * 0.5 / yv).collect();
            drop(y);
            a.accumulate_grad(&d);
        }
        Op::Square(a) => {
            let x = a.data();
            let d: Vec<f32> = g.iter().zip(x.iter()).map(|(gv, xv)| gv * 2.0 * xv).collect();
            drop(x);
            a.accumulate_grad(&d);
        }
        Op::Matmul(a, b) => {
            let (n, k) = (a.shape()[0], a.shape()[1]);
            let m = b.shape()[1];
            let (ad, bd) = (a.data(), b.data());
            if a.requires_grad_flag() {
                // dA = G * B^T
                let mut da = vec![0f32; n * k];
                for i in 0..n {
                    for l in 0..k {
                        let mut acc = 0f64;
                        for j in 0..m {
                            acc += g[i * m + j] as f64 * bd[l * m + j] as f64;
                        }
                        da[i * k + l] = acc as f32;
                    }
                }
                a.accumulate_grad(&da);
            }
            if b.requires_grad_flag() {
                // dB = A^T * G
                let mut db = vec![0f32; k * m];
                for l in 0..k {
                    for j in 0..m {
                        let mut acc = 0f64;
                        for i in 0..n {
                            acc += ad[i * k + l] as f64 * g[i * m + j] as f64;
                        }
                        db[l * m + j] = acc as f32;
                    }
                }
                b.accumulate_grad(&db);
            }
        }
        Op::SumAll(a) => {
            a.accumulate_grad(&vec![g[0]; a.numel()]);
        }
        Op::MeanAll(a) => {
            let v = g[0] / a.numel() as f32;
            a.accumulate_grad(&vec![v; a.numel()]);
        }
        Op::SumAxes(a) | Op::MeanAxes(a) => {
            let scale = match op {
                Op::MeanAxes(..) => {
                    (node.numel() as f64 / a.numel() as f64) as f32
                }
                _ => 1.0,
            };
            let mut acc = vec![0f32; a.numel()];
            let st = broadcast_strides(out_shape, a.shape());
            let nd = a.shape().len();
            let mut idx = vec![0usize; nd];
            let mut oi = 0usize;
            let a_shape = a.shape();
            for v in acc.iter_mut() {
                *v = g[oi] * scale;
                for d in (0..nd).rev() {
                    idx[d] += 1;
                    oi += st[d];
                    if idx[d] < a_shape[d] {
                        break;
                    }
                    oi -= st[d] * a_shape[d];
                    idx[d] = 0;
                }
            }
            a.accumulate_grad(&acc);
        }
        Op::Reshape(a) => a.accumulate_grad(g),
        Op::Narrow { x, axis, start } => {
            let shape = x.shape();
            let st = crate::shape::strides(shape);
            let outer: usize = shape[..*axis].iter().product();
            let inner = st[*axis];
            let len = out_shape[*axis];
            let mut acc = vec![0f32; x.numel()];
            for o in 0..outer {
                let dst = o * shape[*axis] * inner + start * inner;
                let src = o * len * inner;
                acc[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
            }
            x.accumulate_grad(&acc);
        }
        Op::BroadcastTo(a) => {
            a.accumulate_grad(&reduce_grad(g, out_shape, a.shape()));
        }
        Op::Concat0(parts) => {
            let mut offset = 0usize;
            for p in parts {
                let n = p.numel();
                if p.requires_grad_flag() {
                    p.accumulate_grad(&g[offset..offset + n]);
                }
                offset += n;
            }
        }
        Op::Sigmoid(a) => {
            let y = node.data();
            let d: Vec<f32> = g
                .iter()
                .zip(y.iter())
                .map(|(gv, yv)| gv * yv * (1.0 - yv))
                .collect();
            drop(y);
            a.accumulate_grad(&d);
        }
        Op::Tanh(a) => {
            let y = node.data();
            let d: Vec<f32> = g
                .iter()
                .zip(y.iter())
                .map(|(gv, yv)| gv * (1.0 - yv * yv))
                .collect();
            drop(y);
            a.accumulate_grad(&d);
        }
        Op::Relu(a) => {
            let x = a.data();
            let d: Vec<f32> = g
                .iter()
                .zip(x.iter())
                .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                .collect();
            drop(x);
            a.accumulate_grad(&d);
        }
        Op::LeakyRelu(a, slope) => {
            let x = a.data();
            let d: Vec<f32> = g
                .iter()
                .zip(x.iter())
                .map(|(gv, xv)| if *xv > 0.0 { *gv } else { gv * slope })
                .collect();
            drop(x);
            a.accumulate_grad(&d);
        }
        Op::Conv2d {
            x,
            k,
            stride,
            padding,
        } => {
            let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
            let (f, _, kh, kw) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
            let (oh, ow) = (out_shape[2], out_shape[3]);
            let xd = x.data();
            let kd = k.data();
            let mut dx = vec![0f64; x.numel()];
            let mut dk = vec![0f64; k.numel()];
            for ni in 0..n {
                for fi in 0..f {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let gv = g[((ni * f + fi) * oh + oy) * ow + ox] as f64;
                            if gv == 0.0 {
                                continue;
                            }
                            for ci in 0..c {
                                for ky in 0..kh {
                                    let iy = (oy * stride + ky) as isize - *padding as isize;
                                    if iy < 0 || iy as usize >= h {
                                        continue;
                                    }
                                    for kx in 0..kw {
                                        let ix = (ox * stride + kx) as isize - *padding as isize;
                                        if ix < 0 || ix as usize >= w {
                                            continue;
                                        }
                                        let xi = ((ni * c + ci) * h + iy as usize) * w + ix as usize;
                                        let ki = ((fi * c + ci) * kh + ky) * kw + kx;
                                        dx[xi] += gv * kd[ki] as f64;
                                        dk[ki] += gv * xd[xi] as f64;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            drop(xd);
            drop(kd);
            if x.requires_grad_flag() {
                let dx: Vec<f32> = dx.into_iter().map(|v| v as f32).collect();
                x.accumulate_grad(&dx);
            }
            if k.requires_grad_flag() {
                let dk: Vec<f32> = dk.into_iter().map(|v| v as f32).collect();
                k.accumulate_grad(&dk);
            }
        }
        Op::ConvTranspose2d {
            x,
            k,
            stride,
            padding,
        } => {
            let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
            let (_, f, kh, kw) = (k.shape()[0], k.shape()[1], k.shape()[2], k.shape()[3]);
            let (oh, ow) = (out_shape[2], out_shape[3]);
            let xd = x.data();
            let kd = k.data();
            let mut dx = vec![0f64; x.numel()];
            let mut dk = vec![0f64; k.numel()];
            for ni in 0..n {
                for ci in 0..c {
                    for iy in 0..h {
                        for ix in 0..w {
                            let xi = ((ni * c + ci) * h + iy) * w + ix;
                            let xv = xd[xi] as f64;
                            for fi in 0..f {
                                for ky in 0..kh {
                                    let oy = (iy * stride + ky) as isize - *padding as isize;
                                    if oy < 0 || oy as usize >= oh {
                                        continue;
                                    }
                                    for kx in 0..kw {
                                        let ox = (ix * stride + kx) as isize - *padding as isize;
                                        if ox < 0 || ox as usize >= ow {
                                            continue;
                                        }
                                        let gi = ((ni * f + fi) * oh + oy as usize) * ow
                                            + ox as usize;
                                        let ki = ((ci * f + fi) * kh + ky) * kw + kx;
                                        dx[xi] += g[gi] as f64 * kd[ki] as f64;
                                        dk[ki] += xv * g[gi] as f64;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            drop(xd);
            drop(kd);
            if x.requires_grad_flag() {
                let dx: Vec<f32> = dx.into_iter().map(|v| v as f32).collect();
                x.accumulate_grad(&dx);
            }
            if k.requires_grad_flag() {
                let dk: Vec<f32> = dk.into_iter().map(|v| v as f32).collect();
                k.accumulate_grad(&dk);
            }
        }
        Op::MaxPool { x, argmax } => {
            let mut acc = vec![0f32; x.numel()];
            for (o, &src) in argmax.iter().enumerate() {
                acc[src] += g[o];
            }
            x.accumulate_grad(&acc);
        }
        Op::AvgPool { x, window, stride } => {
            let (h, w) = (x.shape()[2], x.shape()[3]);
            let (oh, ow) = (out_shape[2], out_shape[3]);
            let planes = x.shape()[0] * x.shape()[1];
            let inv = 1.0 / (window * window) as f32;
            let mut acc = vec![0f32; x.numel()];
            for img in 0..planes {
                let base = img * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let gv = g[(img * oh + oy) * ow + ox] * inv;
                        for ky in 0..*window {
                            for kx in 0..*window {
                                acc[base + (oy * stride + ky) * w + (ox * stride + kx)] += gv;
                            }
                        }
                    }
                }
            }
            x.accumulate_grad(&acc);
        }
        Op::UpsampleNearest(x, factor) => {
            let (h, w) = (x.shape()[2], x.shape()[3]);
            let (oh, ow) = (out_shape[2], out_shape[3]);
            let planes = x.shape()[0] * x.shape()[1];
            let mut acc = vec![0f32; x.numel()];
            for img in 0..planes {
                for oy in 0..oh {
                    for ox in 0..ow {
                        acc[(img * h + oy / factor) * w + ox / factor] +=
                            g[(img * oh + oy) * ow + ox];
                    }
                }
            }
            x.accumulate_grad(&acc);
        }
        Op::FlipH(x) => {
            let (h, w) = (x.shape()[2], x.shape()[3]);
            let planes = x.shape()[0] * x.shape()[1];
            let mut acc = vec![0f32; x.numel()];
            for i in 0..planes * h {
                for xx in 0..w {
                    acc[i * w + (w - 1 - xx)] += g[i * w + xx];
                }
            }
            x.accumulate_grad(&acc);
        }
        Op::Rot90(x, k) => {
            // inverse rotation of the gradient
            let (h, w) = (x.shape()[2], x.shape()[3]);
            let planes = x.shape()[0] * x.shape()[1];
            let kk = (4 - (k % 4)) % 4;
            let mut acc = vec![0f32; x.numel()];
            for img in 0..planes {
                let base = img * h * w;
                for y in 0..h {
                    for xx in 0..w {
                        let (mut sy, mut sx) = (y, xx);
                        for _ in 0..kk {
                            let (ny, nx) = (w - 1 - sx, sy);
                            sy = ny;
                            sx = nx;
                        }
                        acc[base + y * w + xx] = g[base + sy * w + sx];
                    }
                }
            }
            x.accumulate_grad(&acc);
        }
        Op::Translate { x, dx, dy } => {
            let (h, w) = (x.shape()[2], x.shape()[3]);
            let planes = x.shape()[0] * x.shape()[1];
            let mut acc = vec![0f32; x.numel()];
            for img in 0..planes {
                let base = img * h * w;
                for y in 0..h {
                    for xx in 0..w {
                        let sy = y as isize - dy;
                        let sx = xx as isize - dx;
                        if sy >= 0 && (sy as usize) < h && sx >= 0 && (sx as usize) < w {
                            acc[base + sy as usize * w + sx as usize] += g[base + y * w + xx];
                        }
                    }
                }
            }
            x.accumulate_grad(&acc);
        }
        Op::Mse { pred, target } => {
            let g0 = g[0];
            let n = pred.numel().max(1) as f32;
            let (pd, td) = (pred.data(), target.data());
            if pred.requires_grad_flag() {
                let d: Vec<f32> = pd
                    .iter()
                    .zip(td.iter())
                    .map(|(&p, &t)| g0 * 2.0 * (p - t) / n)
                    .collect();
                pred.accumulate_grad(&d);
            }
            if target.requires_grad_flag() {
                let d: Vec<f32> = pd
                    .iter()
                    .zip(td.iter())
                    .map(|(&p, &t)| -g0 * 2.0 * (p - t) / n)
                    .collect();
                target.accumulate_grad(&d);
            }
        }
        Op::Bce { pred, target } => {
            let g0 = g[0] as f64;
            let n = pred.numel().max(1) as f64;
            let (pd, td) = (pred.data(), target.data());
            if pred.requires_grad_flag() {
                let d: Vec<f32> = pd
                    .iter()
                    .zip(td.iter())
                    .map(|(&p, &y)| {
                        let pc = (p as f64).clamp(PROB_EPS, 1.0 - PROB_EPS);
                        (g0 * (pc - y as f64) / (pc * (1.0 - pc)) / n) as f32
                    })
                    .collect();
                pred.accumulate_grad(&d);
            }
            if target.requires_grad_flag() {
                let d: Vec<f32> = pd
                    .iter()
                    .map(|&p| {
                        let pc = (p as f64).clamp(PROB_EPS, 1.0 - PROB_EPS);
                        (g0 * ((1.0 - pc).ln() - pc.ln()) / n) as f32
                    })
                    .collect();
                target.accumulate_grad(&d);
            }
        }
        Op::Cce { pred, target } => {
            let g0 = g[0] as f64;
            let rows = if pred.shape().len() >= 2 { pred.shape()[0] } else { 1 } as f64;
            let (pd, td) = (pred.data(), target.data());
            if pred.requires_grad_flag() {
                let d: Vec<f32> = pd
                    .iter()
                    .zip(td.iter())
                    .map(|(&p, &y)| {
                        let pc = (p as f64).clamp(PROB_EPS, 1.0 - PROB_EPS);
                        (-g0 * y as f64 / pc / rows) as f32
                    })
                    .collect();
                pred.accumulate_grad(&d);
            }
            if target.requires_grad_flag() {
                let d: Vec<f32> = pd
                    .iter()
                    .map(|&p| {
                        let pc = (p as f64).clamp(PROB_EPS, 1.0 - PROB_EPS);
                        (-g0 * pc.ln() / rows) as f32
                    })
                    .collect();
                target.accumulate_grad(&d);
            }
        }
    }
}
