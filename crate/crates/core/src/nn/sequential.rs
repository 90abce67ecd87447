//! Declarative layer stacks. The intro and DCGAN networks are plain
//! sequences, so a spec list plus a builder covers both.

use rand::Rng;

use albumgan_tensor::{activation, Activation, Tensor};

use crate::error::{CoreError, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::nn::init::InitScheme;
use crate::nn::layers::{BatchNorm, Conv2d, ConvTranspose2d, Dense, Dropout, Mode};

/// One layer description. Activations attach to the layer that produces
/// their input; `Flatten`/`Reshape` bridge dense and convolutional stages.
#[derive(Debug, Clone)]
pub enum LayerSpec {
    Dense {
        fan_in: usize,
        fan_out: usize,
        init: InitScheme,
        activation: Option<Activation>,
    },
    Conv {
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        init: InitScheme,
        activation: Option<Activation>,
    },
    ConvTranspose {
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        init: InitScheme,
        activation: Option<Activation>,
    },
    BatchNorm {
        features: usize,
        init: InitScheme,
    },
    Dropout {
        rate: f32,
    },
    /// Standalone activation (after a batchnorm, for example).
    Activation(Activation),
    /// [N, ...] -> [N, prod]
    Flatten,
    /// [N, ...] -> [N, dims...]
    Reshape {
        dims: Vec<usize>,
    },
}

pub enum Layer {
    Dense(Dense, Option<Activation>),
    Conv(Conv2d, Option<Activation>),
    ConvTranspose(ConvTranspose2d, Option<Activation>),
    BatchNorm(BatchNorm),
    Dropout(Dropout),
    Activation(Activation),
    Flatten,
    Reshape(Vec<usize>),
}

pub struct Sequential {
    layers: Vec<Layer>,
}

impl Sequential {
    pub fn build<R: Rng>(specs: &[LayerSpec], rng: &mut R) -> Result<Sequential> {
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match spec {
                LayerSpec::Dense {
                    fan_in,
                    fan_out,
                    init,
                    activation,
                } => Layer::Dense(Dense::new(*fan_in, *fan_out, *init, rng)?, *activation),
                LayerSpec::Conv {
                    in_c,
                    out_c,
                    kernel,
                    stride,
                    padding,
                    init,
                    activation,
                } => Layer::Conv(
                    Conv2d::new(*in_c, *out_c, *kernel, *stride, *padding, *init, rng)?,
                    *activation,
                ),
                LayerSpec::ConvTranspose {
                    in_c,
                    out_c,
                    kernel,
                    stride,
                    padding,
                    init,
                    activation,
                } => Layer::ConvTranspose(
                    ConvTranspose2d::new(*in_c, *out_c, *kernel, *stride, *padding, *init, rng)?,
                    *activation,
                ),
                LayerSpec::BatchNorm { features, init } => {
                    Layer::BatchNorm(BatchNorm::new(*features, *init, rng)?)
                }
                LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(*rate)?),
                LayerSpec::Activation(a) => Layer::Activation(*a),
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::Reshape { dims } => Layer::Reshape(dims.clone()),
            };
            layers.push(layer);
        }
        Ok(Sequential { layers })
    }

    pub fn forward<R: Rng>(&self, x: &Tensor, mode: Mode, rng: &mut R) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Dense(l, act) => maybe_activate(l.forward(&h)?, act)?,
                Layer::Conv(l, act) => maybe_activate(l.forward(&h)?, act)?,
                Layer::ConvTranspose(l, act) => maybe_activate(l.forward(&h)?, act)?,
                Layer::BatchNorm(l) => l.forward(&h, mode)?,
                Layer::Dropout(l) => l.forward(&h, mode, rng)?,
                Layer::Activation(a) => activation(*a, &h)?,
                Layer::Flatten => {
                    let n = h.shape()[0];
                    h.reshape(&[n, h.numel() / n])?
                }
                Layer::Reshape(dims) => {
                    let mut shape = vec![h.shape()[0]];
                    shape.extend_from_slice(dims);
                    h.reshape(&shape)?
                }
            };
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(l, _) => out.extend(l.params()),
                Layer::Conv(l, _) => out.extend(l.params()),
                Layer::ConvTranspose(l, _) => out.extend(l.params()),
                Layer::BatchNorm(l) => out.extend(l.params()),
                _ => {}
            }
        }
        out
    }

    /// Serializes parameters and batchnorm running stats under
    /// `<prefix>.<layer index>.<field>`.
    pub fn write_state(&self, ckpt: &mut Checkpoint, prefix: &str) {
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense(l, _) => {
                    put(ckpt, format!("{prefix}.{i}.w"), &l.w);
                    put(ckpt, format!("{prefix}.{i}.b"), &l.b);
                }
                Layer::Conv(l, _) => {
                    put(ckpt, format!("{prefix}.{i}.w"), &l.w);
                    put(ckpt, format!("{prefix}.{i}.b"), &l.b);
                }
                Layer::ConvTranspose(l, _) => {
                    put(ckpt, format!("{prefix}.{i}.w"), &l.w);
                    put(ckpt, format!("{prefix}.{i}.b"), &l.b);
                }
                Layer::BatchNorm(l) => {
                    put(ckpt, format!("{prefix}.{i}.scale"), &l.scale);
                    put(ckpt, format!("{prefix}.{i}.shift"), &l.shift);
                    let (rm, rv) = l.running_stats();
                    let n = rm.len();
                    ckpt.insert(format!("{prefix}.{i}.running_mean"), vec![n], rm);
                    ckpt.insert(format!("{prefix}.{i}.running_var"), vec![n], rv);
                }
                _ => {}
            }
        }
    }

    pub fn read_state(&self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense(l, _) => {
                    take(ckpt, format!("{prefix}.{i}.w"), &l.w)?;
                    take(ckpt, format!("{prefix}.{i}.b"), &l.b)?;
                }
                Layer::Conv(l, _) => {
                    take(ckpt, format!("{prefix}.{i}.w"), &l.w)?;
                    take(ckpt, format!("{prefix}.{i}.b"), &l.b)?;
                }
                Layer::ConvTranspose(l, _) => {
                    take(ckpt, format!("{prefix}.{i}.w"), &l.w)?;
                    take(ckpt, format!("{prefix}.{i}.b"), &l.b)?;
                }
                Layer::BatchNorm(l) => {
                    take(ckpt, format!("{prefix}.{i}.scale"), &l.scale)?;
                    take(ckpt, format!("{prefix}.{i}.shift"), &l.shift)?;
                    let rm = ckpt.require(&format!("{prefix}.{i}.running_mean"))?;
                    let rv = ckpt.require(&format!("{prefix}.{i}.running_var"))?;
                    l.set_running_stats(rm.data.clone(), rv.data.clone())?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn maybe_activate(x: Tensor, act: &Option<Activation>) -> Result<Tensor> {
    match act {
        Some(a) => Ok(activation(*a, &x)?),
        None => Ok(x),
    }
}

pub(crate) fn put(ckpt: &mut Checkpoint, name: String, t: &Tensor) {
    ckpt.insert(name, t.shape().to_vec(), t.to_vec());
}

pub(crate) fn take(ckpt: &Checkpoint, name: String, t: &Tensor) -> Result<()> {
    let e = ckpt.require(&name)?;
    if e.shape != t.shape() {
        return Err(CoreError::Checkpoint(format!(
            "shape mismatch for '{name}': file {:?}, model {:?}",
            e.shape,
            t.shape()
        )));
    }
    t.set_data(&e.data)?;
    Ok(())
}
