//! Equalized-learning-rate layers: weights are stored as N(0,1) draws and
//! rescaled at every forward by the per-layer constant from He's
//! initializer, c = sqrt(2/fan_in), applied as effective = raw / c.

use rand::Rng;

use albumgan_tensor::Tensor;

use crate::error::Result;
use crate::nn::{put, take, Checkpoint};

fn unit_normal<R: Rng>(n: usize, rng: &mut R) -> Vec<f32> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        out.push((r * t.cos()) as f32);
        if out.len() < n {
            out.push((r * t.sin()) as f32);
        }
    }
    out
}

pub struct EqualizedDense {
    pub raw_w: Tensor, // [in,out] ~ N(0,1)
    pub b: Tensor,     // [1,out]
    fan_in: usize,
}

impl EqualizedDense {
    pub fn new<R: Rng>(fan_in: usize, fan_out: usize, bias_init: f32, rng: &mut R) -> Result<EqualizedDense> {
        let w = unit_normal(fan_in * fan_out, rng);
        Ok(EqualizedDense {
            raw_w: Tensor::from_vec(w, &[fan_in, fan_out])?.requires_grad(),
            b: Tensor::full(&[1, fan_out], bias_init).requires_grad(),
            fan_in,
        })
    }

    /// c = sqrt(2/fan_in).
    pub fn he_constant(&self) -> f32 {
        (2.0 / self.fan_in as f32).sqrt()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let w_eff = self.raw_w.mul_scalar(1.0 / self.he_constant())?;
        Ok(x.matmul(&w_eff)?.add(&self.b)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.raw_w.clone(), self.b.clone()]
    }

    pub fn write_state(&self, ckpt: &mut Checkpoint, prefix: &str) {
        put(ckpt, format!("{prefix}.w"), &self.raw_w);
        put(ckpt, format!("{prefix}.b"), &self.b);
    }

    pub fn read_state(&self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        take(ckpt, format!("{prefix}.w"), &self.raw_w)?;
        take(ckpt, format!("{prefix}.b"), &self.b)
    }
}

pub struct EqualizedConv2d {
    pub raw_w: Tensor, // [F,C,kh,kw] ~ N(0,1)
    pub b: Tensor,     // [1,F,1,1]
    pub stride: usize,
    pub padding: usize,
    fan_in: usize,
}

impl EqualizedConv2d {
    pub fn new<R: Rng>(
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<EqualizedConv2d> {
        let w = unit_normal(out_c * in_c * kernel * kernel, rng);
        Ok(EqualizedConv2d {
            raw_w: Tensor::from_vec(w, &[out_c, in_c, kernel, kernel])?.requires_grad(),
            b: Tensor::zeros(&[1, out_c, 1, 1]).requires_grad(),
            stride,
            padding,
            fan_in: in_c * kernel * kernel,
        })
    }

    pub fn he_constant(&self) -> f32 {
        (2.0 / self.fan_in as f32).sqrt()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let w_eff = self.raw_w.mul_scalar(1.0 / self.he_constant())?;
        Ok(x.conv2d(&w_eff, self.stride, self.padding)?.add(&self.b)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.raw_w.clone(), self.b.clone()]
    }

    pub fn write_state(&self, ckpt: &mut Checkpoint, prefix: &str) {
        put(ckpt, format!("{prefix}.w"), &self.raw_w);
        put(ckpt, format!("{prefix}.b"), &self.b);
    }

    pub fn read_state(&self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        take(ckpt, format!("{prefix}.w"), &self.raw_w)?;
        take(ckpt, format!("{prefix}.b"), &self.b)
    }
}
