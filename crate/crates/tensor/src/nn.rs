//! Neural-network primitives: activations, convolutions, pooling, upsampling.

use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::tensor::Tensor;

/// Activation kinds selectable at layer-spec level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f32),
}

/// Applies `kind` elementwise, recording the gradient.
pub fn activation(kind: Activation, x: &Tensor) -> Result<Tensor> {
    match kind {
        Activation::Sigmoid => x.sigmoid(),
        Activation::Tanh => x.tanh(),
        Activation::Relu => x.relu(),
        Activation::LeakyRelu(a) => x.leaky_relu(a),
    }
}

fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tensor {
    pub fn sigmoid(&self) -> Result<Tensor> {
        let out = self
            .data()
            .iter()
            .map(|&v| sigmoid_f64(v as f64) as f32)
            .collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::Sigmoid(self.clone()))
    }

    pub fn tanh(&self) -> Result<Tensor> {
        let out = self.data().iter().map(|&v| (v as f64).tanh() as f32).collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::Tanh(self.clone()))
    }

    pub fn relu(&self) -> Result<Tensor> {
        let out = self.data().iter().map(|&v| v.max(0.0)).collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::Relu(self.clone()))
    }

    /// Leaky rectifier: `x` for x > 0, `a*x` otherwise. Requires a in (0,1).
    pub fn leaky_relu(&self, a: f32) -> Result<Tensor> {
        if !(0.0..1.0).contains(&a) || a == 0.0 {
            return Err(TensorError::InvalidArgument {
                op: "leaky_relu",
                msg: format!("slope must be in (0,1), got {a}"),
            });
        }
        let out = self
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { a * v })
            .collect();
        Tensor::from_op(out, self.shape().to_vec(), Op::LeakyRelu(self.clone(), a))
    }

    /// 2-D convolution. `self` is [N,C,H,W], `kernel` is [F,C,kh,kw]; zero
    /// padding; output spatial size floor((H+2p-kh)/stride)+1.
    pub fn conv2d(&self, kernel: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("conv2d")?;
        let (f, kc, kh, kw) = kernel.dims4("conv2d")?;
        if kc != c {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: self.shape().to_vec(),
                rhs: kernel.shape().to_vec(),
            });
        }
        if stride == 0 || kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(TensorError::InvalidArgument {
                op: "conv2d",
                msg: format!("kernel {kh}x{kw} stride {stride} incompatible with input {h}x{w} pad {padding}"),
            });
        }
        let oh = (h + 2 * padding - kh) / stride + 1;
        let ow = (w + 2 * padding - kw) / stride + 1;
        let x = self.data();
        let k = kernel.data();
        let mut out = vec![0f32; n * f * oh * ow];
        for ni in 0..n {
            for fi in 0..f {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0f64;
                        for ci in 0..c {
                            for ky in 0..kh {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                if iy < 0 || iy as usize >= h {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox * stride + kx) as isize - padding as isize;
                                    if ix < 0 || ix as usize >= w {
                                        continue;
                                    }
                                    let xv = x[((ni * c + ci) * h + iy as usize) * w + ix as usize];
                                    let kv = k[((fi * c + ci) * kh + ky) * kw + kx];
                                    acc += xv as f64 * kv as f64;
                                }
                            }
                        }
                        out[((ni * f + fi) * oh + oy) * ow + ox] = acc as f32;
                    }
                }
            }
        }
        drop(x);
        drop(k);
        Tensor::from_op(
            out,
            vec![n, f, oh, ow],
            Op::Conv2d {
                x: self.clone(),
                k: kernel.clone(),
                stride,
                padding,
            },
        )
    }

    /// Transposed 2-D convolution (the adjoint of `conv2d`). `self` is
    /// [N,Cin,H,W], `kernel` is [Cin,Cout,kh,kw]; output spatial size
    /// (H-1)*stride - 2*padding + kh.
    pub fn conv_transpose2d(
        &self,
        kernel: &Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("conv_transpose2d")?;
        let (kc, f, kh, kw) = kernel.dims4("conv_transpose2d")?;
        if kc != c {
            return Err(TensorError::ShapeMismatch {
                op: "conv_transpose2d",
                lhs: self.shape().to_vec(),
                rhs: kernel.shape().to_vec(),
            });
        }
        let oh = (h - 1) * stride + kh;
        let ow = (w - 1) * stride + kw;
        if stride == 0 || oh < 2 * padding + 1 || ow < 2 * padding + 1 {
            return Err(TensorError::InvalidArgument {
                op: "conv_transpose2d",
                msg: format!("kernel {kh}x{kw} stride {stride} pad {padding} incompatible with input {h}x{w}"),
            });
        }
        let oh = oh - 2 * padding;
        let ow = ow - 2 * padding;
        let x = self.data();
        let k = kernel.data();
        let mut acc = vec![0f64; n * f * oh * ow];
        for ni in 0..n {
            for ci in 0..c {
                for iy in 0..h {
                    for ix in 0..w {
                        let xv = x[((ni * c + ci) * h + iy) * w + ix] as f64;
                        for fi in 0..f {
                            for ky in 0..kh {
                                let oy = (iy * stride + ky) as isize - padding as isize;
                                if oy < 0 || oy as usize >= oh {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ox = (ix * stride + kx) as isize - padding as isize;
                                    if ox < 0 || ox as usize >= ow {
                                        continue;
                                    }
                                    let kv = k[((ci * f + fi) * kh + ky) * kw + kx] as f64;
                                    acc[((ni * f + fi) * oh + oy as usize) * ow + ox as usize] +=
                                        xv * kv;
                                }
                            }
                        }
                    }
                }
            }
        }
        drop(x);
        drop(k);
        let out = acc.into_iter().map(|v| v as f32).collect();
        Tensor::from_op(
            out,
            vec![n, f, oh, ow],
            Op::ConvTranspose2d {
                x: self.clone(),
                k: kernel.clone(),
                stride,
                padding,
            },
        )
    }

    /// Max pooling over square windows. Gradient routes to the first maximum
    /// of each region, which keeps replay deterministic on ties.
    pub fn max_pool(&self, window: usize, stride: usize) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("max_pool")?;
        check_pool(window, stride, h, w)?;
        let oh = (h - window) / stride + 1;
        let ow = (w - window) / stride + 1;
        let x = self.data();
        let mut out = vec![0f32; n * c * oh * ow];
        let mut argmax = vec![0usize; out.len()];
        for img in 0..n * c {
            let base = img * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    let mut best_i = 0usize;
                    for ky in 0..window {
                        for kx in 0..window {
                            let i = base + (oy * stride + ky) * w + (ox * stride + kx);
                            if x[i] > best {
                                best = x[i];
                                best_i = i;
                            }
                        }
                    }
                    let o = (img * oh + oy) * ow + ox;
                    out[o] = best;
                    argmax[o] = best_i;
                }
            }
        }
        drop(x);
        Tensor::from_op(
            out,
            vec![n, c, oh, ow],
            Op::MaxPool {
                x: self.clone(),
                argmax,
            },
        )
    }

    /// Average pooling over square windows.
    pub fn avg_pool(&self, window: usize, stride: usize) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("avg_pool")?;
        check_pool(window, stride, h, w)?;
        let oh = (h - window) / stride + 1;
        let ow = (w - window) / stride + 1;
        let x = self.data();
        let mut out = vec![0f32; n * c * oh * ow];
        let inv = 1.0 / (window * window) as f64;
        for img in 0..n * c {
            let base = img * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0f64;
                    for ky in 0..window {
                        for kx in 0..window {
                            acc += x[base + (oy * stride + ky) * w + (ox * stride + kx)] as f64;
                        }
                    }
                    out[(img * oh + oy) * ow + ox] = (acc * inv) as f32;
                }
            }
        }
        drop(x);
        Tensor::from_op(
            out,
            vec![n, c, oh, ow],
            Op::AvgPool {
                x: self.clone(),
                window,
                stride,
            },
        )
    }

    /// Nearest-neighbour upsampling by an integer factor.
    pub fn upsample_nearest(&self, factor: usize) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4("upsample_nearest")?;
        if factor == 0 {
            return Err(TensorError::InvalidArgument {
                op: "upsample_nearest",
                msg: "factor must be >= 1".into(),
            });
        }
        let (oh, ow) = (h * factor, w * factor);
        let x = self.data();
        let mut out = vec![0f32; n * c * oh * ow];
        for img in 0..n * c {
            for oy in 0..oh {
                for ox in 0..ow {
                    out[(img * oh + oy) * ow + ox] =
                        x[(img * h + oy / factor) * w + ox / factor];
                }
            }
        }
        drop(x);
        Tensor::from_op(
            out,
            vec![n, c, oh, ow],
            Op::UpsampleNearest(self.clone(), factor),
        )
    }
}

fn check_pool(window: usize, stride: usize, h: usize, w: usize) -> Result<()> {
    if window == 0 || stride == 0 || window > h || window > w {
        return Err(TensorError::InvalidArgument {
            op: "pool",
            msg: format!("window {window} stride {stride} incompatible with input {h}x{w}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: Vec<f32>, shape: &[usize]) -> Tensor {
        Tensor::from_vec(data, shape).unwrap()
    }

    #[test]
    fn sigmoid_and_tanh_at_zero() {
        let x = t(vec![0.0], &[1]);
        assert_eq!(x.sigmoid().unwrap().to_vec(), vec![0.5]);
        assert_eq!(x.tanh().unwrap().to_vec(), vec![0.0]);
    }

    #[test]
    fn leaky_relu_negative_slope() {
        let x = t(vec![-1.0, 2.0], &[2]);
        let y = x.leaky_relu(0.2).unwrap();
        assert_eq!(y.to_vec(), vec![-0.2, 2.0]);
        assert!(x.leaky_relu(0.0).is_err());
        assert!(x.leaky_relu(1.0).is_err());
    }

    #[test]
    fn conv2d_identity_kernel() {
        let x = t((1..=9).map(|v| v as f32).collect(), &[1, 1, 3, 3]);
        let k = t(vec![1.0], &[1, 1, 1, 1]);
        let y = x.conv2d(&k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn conv2d_ones_window() {
        // 4x4 ones, 3x3 ones kernel, stride 1, pad 0 -> 2x2 of 9s
        let x = t(vec![1.0; 16], &[1, 1, 4, 4]);
        let k = t(vec![1.0; 9], &[1, 1, 3, 3]);
        let y = x.conv2d(&k, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.to_vec(), vec![9.0; 4]);
    }

    #[test]
    fn conv2d_shape_arithmetic() {
        // 28x28 input, 5x5 kernel, stride 2, pad 2 -> 14x14
        let x = t(vec![0.5; 28 * 28], &[1, 1, 28, 28]);
        let k = t(vec![0.1; 25], &[1, 1, 5, 5]);
        let y = x.conv2d(&k, 2, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 14, 14]);
    }

    #[test]
    fn conv_transpose2d_identity_and_shape() {
        let x = t(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
        let k = t(vec![1.0], &[1, 1, 1, 1]);
        let y = x.conv_transpose2d(&k, 1, 0).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());

        // 7x7 input, 4x4 kernel, stride 2, pad 1 -> 14x14
        let x = t(vec![0.25; 49], &[1, 1, 7, 7]);
        let k = t(vec![0.1; 16], &[1, 1, 4, 4]);
        let y = x.conv_transpose2d(&k, 2, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 14, 14]);
    }

    #[test]
    fn pool_examples() {
        let x = t(vec![3.0; 9], &[1, 1, 3, 3]);
        let y = x.max_pool(2, 1).unwrap();
        assert_eq!(y.to_vec(), vec![3.0; 4]);

        let x = t(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
        let y = x.avg_pool(2, 2).unwrap();
        assert_eq!(y.to_vec(), vec![2.5]);

        // 4x4 known grid, max 2x2 stride 2 -> region maxima
        let x = t(
            vec![
                1., 5., 2., 0., //
                3., 4., 1., 1., //
                0., 0., 9., 8., //
                2., 1., 7., 6.,
            ],
            &[1, 1, 4, 4],
        );
        let y = x.max_pool(2, 2).unwrap();
        assert_eq!(y.to_vec(), vec![5., 2., 2., 9.]);
    }

    #[test]
    fn pool_window_too_large_is_error() {
        let x = t(vec![1.0; 4], &[1, 1, 2, 2]);
        assert!(x.max_pool(3, 1).is_err());
    }

    #[test]
    fn upsample_nearest_doubles() {
        let x = t(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 2, 2]);
        let y = x.upsample_nearest(2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4, 4]);
        assert_eq!(
            y.to_vec(),
            vec![1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
        );
    }
}
