//! Layer building blocks with trainable parameters.

use std::cell::RefCell;

use rand::Rng;

use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};
use crate::nn::init::{init_weights, InitScheme, InitSpec, LayerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Fully connected layer: w [in,out], bias [1,out], biases start at 0.
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn new<R: Rng>(fan_in: usize, fan_out: usize, scheme: InitScheme, rng: &mut R) -> Result<Dense> {
        let spec = InitSpec::new(scheme, fan_in, fan_out)?;
        let w = init_weights(&spec, LayerKind::Dense, fan_in * fan_out, rng)?;
        Ok(Dense {
            w: Tensor::from_vec(w, &[fan_in, fan_out])?.requires_grad(),
            b: Tensor::zeros(&[1, fan_out]).requires_grad(),
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.w)?.add(&self.b)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.w.clone(), self.b.clone()]
    }
}

pub struct Conv2d {
    pub w: Tensor, // [F,C,kh,kw]
    pub b: Tensor, // [1,F,1,1]
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new<R: Rng>(
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        scheme: InitScheme,
        rng: &mut R,
    ) -> Result<Conv2d> {
        // fan counts follow the weight layout: n_l = in_c*k*k, m_l = out_c*k*k
        let spec = InitSpec::new(scheme, in_c * kernel * kernel, out_c * kernel * kernel)?;
        let w = init_weights(&spec, LayerKind::Conv, out_c * in_c * kernel * kernel, rng)?;
        Ok(Conv2d {
            w: Tensor::from_vec(w, &[out_c, in_c, kernel, kernel])?.requires_grad(),
            b: Tensor::zeros(&[1, out_c, 1, 1]).requires_grad(),
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.conv2d(&self.w, self.stride, self.padding)?.add(&self.b)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.w.clone(), self.b.clone()]
    }
}

pub struct ConvTranspose2d {
    pub w: Tensor, // [Cin,Cout,kh,kw]
    pub b: Tensor, // [1,Cout,1,1]
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose2d {
    pub fn new<R: Rng>(
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        scheme: InitScheme,
        rng: &mut R,
    ) -> Result<ConvTranspose2d> {
        let spec = InitSpec::new(scheme, out_c * kernel * kernel, in_c * kernel * kernel)?;
        let w = init_weights(&spec, LayerKind::ConvTranspose, in_c * out_c * kernel * kernel, rng)?;
        Ok(ConvTranspose2d {
            w: Tensor::from_vec(w, &[in_c, out_c, kernel, kernel])?.requires_grad(),
            b: Tensor::zeros(&[1, out_c, 1, 1]).requires_grad(),
            stride,
            padding,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.conv_transpose2d(&self.w, self.stride, self.padding)?.add(&self.b)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.w.clone(), self.b.clone()]
    }
}

/// Batch normalization with learnable scale/shift and running statistics for
/// eval mode. Train mode standardizes over the batch (and spatial dims for
/// 4-D inputs); epsilon 1e-5 guards the variance square root.
pub struct BatchNorm {
    pub scale: Tensor,
    pub shift: Tensor,
    running_mean: RefCell<Vec<f32>>,
    running_var: RefCell<Vec<f32>>,
    pub momentum: f32,
    pub eps: f32,
    features: usize,
}

impl BatchNorm {
    pub const EPS: f32 = 1e-5;
    pub const MOMENTUM: f32 = 0.1;

    pub fn new<R: Rng>(features: usize, scheme: InitScheme, rng: &mut R) -> Result<BatchNorm> {
        let scale = match scheme {
            InitScheme::DefaultDcgan => {
                crate::nn::init::init_default_dcgan_batchnorm(features, rng).0
            }
            // the custom initialization sets batchnorm weights to constant 1
            _ => vec![1.0; features],
        };
        Ok(BatchNorm {
            scale: Tensor::from_vec(scale, &[features])?.requires_grad(),
            shift: Tensor::zeros(&[features]).requires_grad(),
            running_mean: RefCell::new(vec![0.0; features]),
            running_var: RefCell::new(vec![1.0; features]),
            momentum: Self::MOMENTUM,
            eps: Self::EPS,
            features,
        })
    }

    fn param_shape(&self, rank: usize) -> Vec<usize> {
        if rank == 4 {
            vec![1, self.features, 1, 1]
        } else {
            vec![1, self.features]
        }
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let rank = x.shape().len();
        if rank != 2 && rank != 4 {
            return Err(CoreError::InvalidInput(format!(
                "batchnorm expects rank 2 or 4 input, got {:?}",
                x.shape()
            )));
        }
        if x.shape()[1] != self.features {
            return Err(CoreError::InvalidInput(format!(
                "batchnorm built for {} features, input has {}",
                self.features,
                x.shape()[1]
            )));
        }
        let axes: Vec<usize> = if rank == 4 { vec![0, 2, 3] } else { vec![0] };
        let pshape = self.param_shape(rank);
        let scale = self.scale.reshape(&pshape)?;
        let shift = self.shift.reshape(&pshape)?;
        match mode {
            Mode::Train => {
                if x.shape()[0] < 2 {
                    return Err(CoreError::InvalidInput(
                        "batchnorm train mode requires batch size >= 2".into(),
                    ));
                }
                let mu = x.mean_axes(&axes)?;
                let centered = x.sub(&mu)?;
                let var = centered.square()?.mean_axes(&axes)?;
                let denom = var.add_scalar(self.eps)?.sqrt()?;
                let normed = centered.div(&denom)?;
                self.update_running(&mu.to_vec(), &var.to_vec());
                Ok(normed.mul(&scale)?.add(&shift)?)
            }
            Mode::Eval => {
                let rm = Tensor::from_vec(self.running_mean.borrow().clone(), &pshape)?;
                let rv_data: Vec<f32> = self
                    .running_var
                    .borrow()
                    .iter()
                    .map(|v| (v + self.eps).sqrt())
                    .collect();
                let rstd = Tensor::from_vec(rv_data, &pshape)?;
                Ok(x.sub(&rm)?.div(&rstd)?.mul(&scale)?.add(&shift)?)
            }
        }
    }

    fn update_running(&self, mu: &[f32], var: &[f32]) {
        let mut rm = self.running_mean.borrow_mut();
        let mut rv = self.running_var.borrow_mut();
        for i in 0..self.features {
            rm[i] = (1.0 - self.momentum) * rm[i] + self.momentum * mu[i];
            rv[i] = (1.0 - self.momentum) * rv[i] + self.momentum * var[i];
        }
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![self.scale.clone(), self.shift.clone()]
    }

    pub fn running_stats(&self) -> (Vec<f32>, Vec<f32>) {
        (self.running_mean.borrow().clone(), self.running_var.borrow().clone())
    }

    pub fn set_running_stats(&self, mean: Vec<f32>, var: Vec<f32>) -> Result<()> {
        if mean.len() != self.features || var.len() != self.features {
            return Err(CoreError::InvalidInput(
                "running stats length does not match feature count".into(),
            ));
        }
        *self.running_mean.borrow_mut() = mean;
        *self.running_var.borrow_mut() = var;
        Ok(())
    }
}

/// Inverted dropout: train mode zeroes elements with probability `rate` and
/// rescales survivors by 1/(1-rate); eval mode is the identity.
pub struct Dropout {
    pub rate: f32,
}

impl Dropout {
    pub fn new(rate: f32) -> Result<Dropout> {
        if !(0.0..1.0).contains(&rate) {
            return Err(CoreError::InvalidConfig(format!(
                "dropout rate must be in [0,1), got {rate}"
            )));
        }
        Ok(Dropout { rate })
    }

    pub fn forward<R: Rng>(&self, x: &Tensor, mode: Mode, rng: &mut R) -> Result<Tensor> {
        if mode == Mode::Eval || self.rate == 0.0 {
            return Ok(x.clone());
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask: Vec<f32> = (0..x.numel())
            .map(|_| if rng.gen::<f32>() < self.rate { 0.0 } else { scale })
            .collect();
        let mask = Tensor::from_vec(mask, x.shape())?;
        Ok(x.mul(&mask)?)
    }
}
