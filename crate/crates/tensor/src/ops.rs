//! Elementwise arithmetic, reductions and data-movement ops.
//!
//! Reductions and matmul accumulate in f64 and store f32, which keeps results
//! independent of summation order at these sizes.

use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::shape::{broadcast_shape, for_each_broadcast, strides};
use crate::tensor::Tensor;

fn binary_forward(
    name: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f32, f32) -> f32,
) -> Result<(Vec<f32>, Vec<usize>)> {
    let out_shape = broadcast_shape(a.shape(), b.shape()).ok_or(TensorError::ShapeMismatch {
        op: name,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    })?;
    let ad = a.data();
    let bd = b.data();
    let mut out = vec![0f32; out_shape.iter().product()];
    for_each_broadcast(&out_shape, a.shape(), b.shape(), |oi, ai, bi| {
        out[oi] = f(ad[ai], bd[bi]);
    });
    Ok((out, out_shape))
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let (out, shape) = binary_forward("add", self, other, |x, y| x + y)?;
        Tensor::from_op(out, shape, Op::Add(self.clone(), other.clone()))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        let (out, shape) = binary_forward("sub", self, other, |x, y| x - y)?;
        Tensor::from_op(out, shape, Op::Sub(self.clone(), other.clone()))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        let (out, shape) = binary_forward("mul", self, other, |x, y| x * y)?;
        Tensor::from_op(out, shape, Op::Mul(self.clone(), other.clone()))
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        let (out, shape) = binary_forward("div", self, other, |x, y| x / y)?;
        Tensor::from_op(out, shape, Op::Div(self.clone(), other.clone()))
    }

    pub fn add_scalar(&self, s: f32) -> Result<Tensor> {
        let out = self.data().iter().map(|v| v + s).collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::AddScalar(self.clone()))
    }

    pub fn mul_scalar(&self, s: f32) -> Result<Tensor> {
        let out = self.data().iter().map(|v| v * s).collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::MulScalar(self.clone(), s))
    }

    pub fn neg(&self) -> Result<Tensor> {
        let out = self.data().iter().map(|v| -v).collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::Neg(self.clone()))
    }

    pub fn sqrt(&self) -> Result<Tensor> {
        let out = self.data().iter().map(|v| v.sqrt()).collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::Sqrt(self.clone()))
    }

    pub fn square(&self) -> Result<Tensor> {
        let out = self.data().iter().map(|v| v * v).collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::Square(self.clone()))
    }

    /// 2-D matrix product: [n,k] x [k,m] -> [n,m].
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (a_shape, b_shape) = (self.shape(), other.shape());
        if a_shape.len() != 2 || b_shape.len() != 2 || a_shape[1] != b_shape[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: a_shape.to_vec(),
                rhs: b_shape.to_vec(),
            });
        }
        let (n, k, m) = (a_shape[0], a_shape[1], b_shape[1]);
        let a = self.data();
        let b = other.data();
        let mut out = vec![0f32; n * m];
        for i in 0..n {
            for j in 0..m {
                let mut acc = 0f64;
                for l in 0..k {
                    acc += a[i * k + l] as f64 * b[l * m + j] as f64;
                }
                out[i * m + j] = acc as f32;
            }
        }
        Tensor::from_op(out, vec![n, m], Op::Matmul(self.clone(), other.clone()))
    }

    /// Sum of all elements as a rank-0 scalar.
    pub fn sum_all(&self) -> Result<Tensor> {
        let s: f64 = self.data().iter().map(|&v| v as f64).sum();
        Tensor::from_op(vec![s as f32], vec![], Op::SumAll(self.clone()))
    }

    /// Mean of all elements as a rank-0 scalar.
    pub fn mean_all(&self) -> Result<Tensor> {
        let n = self.numel();
        if n == 0 {
            return Err(TensorError::InvalidArgument {
                op: "mean_all",
                msg: "empty tensor".into(),
            });
        }
        let s: f64 = self.data().iter().map(|&v| v as f64).sum();
        Tensor::from_op(vec![(s / n as f64) as f32], vec![], Op::MeanAll(self.clone()))
    }

    /// Sum over `axes`, keeping reduced dimensions with size 1.
    pub fn sum_axes(&self, axes: &[usize]) -> Result<Tensor> {
        let (out, shape) = reduce_axes(self, axes, false)?;
        Tensor::from_op(out, shape, Op::SumAxes(self.clone()))
    }

    /// Mean over `axes`, keeping reduced dimensions with size 1.
    pub fn mean_axes(&self, axes: &[usize]) -> Result<Tensor> {
        let (out, shape) = reduce_axes(self, axes, true)?;
        Tensor::from_op(out, shape, Op::MeanAxes(self.clone()))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Tensor::from_op(self.to_vec(), shape.to_vec(), Op::Reshape(self.clone()))
    }

    /// Contiguous slice of length `len` along `axis`, starting at `start`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let shape = self.shape();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(TensorError::InvalidArgument {
                op: "narrow",
                msg: format!("axis {axis} range {start}..{} out of {:?}", start + len, shape),
            });
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        let st = strides(shape);
        let outer: usize = shape[..axis].iter().product();
        let inner = st[axis];
        let d = self.data();
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            let base = o * shape[axis] * inner + start * inner;
            out.extend_from_slice(&d[base..base + len * inner]);
        }
        Tensor::from_op(
            out,
            out_shape,
            Op::Narrow {
                x: self.clone(),
                axis,
                start,
            },
        )
    }

    /// Expands size-1 dimensions to `shape` (same rank).
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        let ok = broadcast_shape(self.shape(), shape).map(|s| s == shape) == Some(true);
        if !ok {
            return Err(TensorError::ShapeMismatch {
                op: "broadcast_to",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let d = self.data();
        let mut out = vec![0f32; shape.iter().product()];
        for_each_broadcast(shape, self.shape(), self.shape(), |oi, ai, _| {
            out[oi] = d[ai];
        });
        Tensor::from_op(out, shape.to_vec(), Op::BroadcastTo(self.clone()))
    }

    /// Concatenates tensors along axis 0. All trailing dimensions must match.
    pub fn concat0(parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat0",
                msg: "no tensors to concatenate".into(),
            });
        }
        let tail = &parts[0].shape()[1..];
        let mut n0 = 0usize;
        for p in parts {
            if p.shape().is_empty() || &p.shape()[1..] != tail {
                return Err(TensorError::ShapeMismatch {
                    op: "concat0",
                    lhs: parts[0].shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
            n0 += p.shape()[0];
        }
        let mut out_shape = vec![n0];
        out_shape.extend_from_slice(tail);
        let mut out = Vec::with_capacity(out_shape.iter().product());
        for p in parts {
            out.extend_from_slice(&p.data());
        }
        Tensor::from_op(out, out_shape, Op::Concat0(parts.to_vec()))
    }

    /// Reverses the last (width) axis of an [N,C,H,W] tensor.
    pub fn flip_h(&self) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("flip_h")?;
        let d = self.data();
        let mut out = vec![0f32; d.len()];
        for i in 0..n * c * h {
            for x in 0..w {
                out[i * w + x] = d[i * w + (w - 1 - x)];
            }
        }
        drop(d);
        Tensor::from_op(out, vec![n, c, h, w], Op::FlipH(self.clone()))
    }

    /// Rotates the spatial plane of an [N,C,H,W] tensor by `k` quarter turns
    /// clockwise. Requires H == W so the shape is preserved.
    pub fn rot90(&self, k: u8) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("rot90")?;
        if h != w {
            return Err(TensorError::InvalidArgument {
                op: "rot90",
                msg: format!("requires square spatial dims, got {h}x{w}"),
            });
        }
        let k = k % 4;
        let d = self.data();
        let mut out = vec![0f32; d.len()];
        for img in 0..n * c {
            let base = img * h * w;
            for y in 0..h {
                for x in 0..w {
                    // one clockwise quarter turn maps (y, x) -> (x, h-1-y)
                    let (mut sy, mut sx) = (y, x);
                    for _ in 0..k {
                        let (ny, nx) = (w - 1 - sx, sy);
                        sy = ny;
                        sx = nx;
                    }
                    out[base + y * w + x] = d[base + sy * w + sx];
                }
            }
        }
        drop(d);
        Tensor::from_op(out, vec![n, c, h, w], Op::Rot90(self.clone(), k))
    }

    /// Integer shift of the spatial plane with zero fill. Positive `dx`
    /// moves content right, positive `dy` moves it down.
    pub fn translate(&self, dx: isize, dy: isize) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("translate")?;
        let d = self.data();
        let mut out = vec![0f32; d.len()];
        for img in 0..n * c {
            let base = img * h * w;
            for y in 0..h {
                for x in 0..w {
                    let sy = y as isize - dy;
                    let sx = x as isize - dx;
                    if sy >= 0 && (sy as usize) < h && sx >= 0 && (sx as usize) < w {
                        out[base + y * w + x] = d[base + sy as usize * w + sx as usize];
                    }
                }
            }
        }
        drop(d);
        Tensor::from_op(
            out,
            vec![n, c, h, w],
            Op::Translate {
                x: self.clone(),
                dx,
                dy,
            },
        )
    }

    pub(crate) fn dims4(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match self.shape() {
            [n, c, h, w] => Ok((*n, *c, *h, *w)),
            other => Err(TensorError::ShapeMismatch {
                op,
                lhs: other.to_vec(),
                rhs: vec![0, 0, 0, 0],
            }),
        }
    }
}

fn reduce_axes(t: &Tensor, axes: &[usize], mean: bool) -> Result<(Vec<f32>, Vec<usize>)> {
    let shape = t.shape();
    for &a in axes {
        if a >= shape.len() {
            return Err(TensorError::InvalidArgument {
                op: if mean { "mean_axes" } else { "sum_axes" },
                msg: format!("axis {a} out of rank {}", shape.len()),
            });
        }
    }
    let mut out_shape = shape.to_vec();
    let mut count = 1usize;
    for &a in axes {
        count *= out_shape[a];
        out_shape[a] = 1;
    }
    let out_n: usize = out_shape.iter().product();
    let mut acc = vec![0f64; out_n];
    let st = crate::shape::broadcast_strides(&out_shape, shape);
    let nd = shape.len();
    let mut idx = vec![0usize; nd];
    let mut oi = 0usize;
    let d = t.data();
    for &v in d.iter() {
        acc[oi] += v as f64;
        for dim in (0..nd).rev() {
            idx[dim] += 1;
            oi += st[dim];
            if idx[dim] < shape[dim] {
                break;
            }
            oi -= st[dim] * shape[dim];
            idx[dim] = 0;
        }
    }
    let denom = if mean { count.max(1) as f64 } else { 1.0 };
    Ok((acc.into_iter().map(|v| (v / denom) as f32).collect(), out_shape))
}
