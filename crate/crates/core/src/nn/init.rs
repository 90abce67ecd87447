//! The three weight-initialization schemes compared in the DCGAN
//! experiments.

use rand::Rng;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Conv weights ~ N(0, 0.02); batchnorm scale ~ N(1, 0.02), bias 0.
    DefaultDcgan,
    /// N(0, 2/n_l) for rectifier layers.
    He,
    /// U(-b, b) with b = sqrt(6)/sqrt(n_l + m_l), for tanh/sigmoid layers.
    XavierNormalized,
}

/// Declarative initializer description: scheme plus the fan counts it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub scheme: InitScheme,
    /// n_l, the inputs to the node.
    pub fan_in: usize,
    /// m_l, the outputs from the layer.
    pub fan_out: usize,
}

impl InitSpec {
    pub fn new(scheme: InitScheme, fan_in: usize, fan_out: usize) -> Result<InitSpec> {
        if fan_in == 0 || fan_out == 0 {
            return Err(CoreError::InvalidConfig(
                "init fan_in and fan_out must be >= 1".into(),
            ));
        }
        Ok(InitSpec {
            scheme,
            fan_in,
            fan_out,
        })
    }
}

fn normal<R: Rng>(n: usize, mean: f64, std: f64, rng: &mut R) -> Vec<f32> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        out.push((mean + std * r * t.cos()) as f32);
        if out.len() < n {
            out.push((mean + std * r * t.sin()) as f32);
        }
    }
    out
}

/// He initialization: N(0, 2/n_l), std = sqrt(2/fan_in).
pub fn init_he<R: Rng>(n: usize, fan_in: usize, rng: &mut R) -> Vec<f32> {
    normal(n, 0.0, (2.0 / fan_in as f64).sqrt(), rng)
}

/// Normalized Xavier: U(-b, b), b = sqrt(6)/sqrt(n_l + m_l).
pub fn init_xavier_normalized<R: Rng>(
    n: usize,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Vec<f32> {
    let b = 6f64.sqrt() / ((fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| (rng.gen::<f64>() * 2.0 * b - b) as f32).collect()
}

/// The tutorial default for conv / conv-transpose weights: N(0, 0.02).
pub fn init_default_dcgan_conv<R: Rng>(n: usize, rng: &mut R) -> Vec<f32> {
    normal(n, 0.0, 0.02, rng)
}

/// The tutorial default for batchnorm: scale ~ N(1, 0.02), bias exactly 0.
pub fn init_default_dcgan_batchnorm<R: Rng>(n: usize, rng: &mut R) -> (Vec<f32>, Vec<f32>) {
    (normal(n, 1.0, 0.02, rng), vec![0.0; n])
}

/// Layer kinds an initializer can be asked to fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Conv,
    ConvTranspose,
    BatchNorm,
    Dropout,
}

/// The default-DCGAN scheme applied by layer kind. Dense and dropout layers
/// are outside its domain.
pub fn init_default_dcgan<R: Rng>(kind: LayerKind, n: usize, rng: &mut R) -> Result<Vec<f32>> {
    match kind {
        LayerKind::Conv | LayerKind::ConvTranspose => Ok(init_default_dcgan_conv(n, rng)),
        LayerKind::BatchNorm => Ok(init_default_dcgan_batchnorm(n, rng).0),
        other => Err(CoreError::InvalidConfig(format!(
            "default DCGAN init does not apply to {other:?} layers"
        ))),
    }
}

/// Weight draw for a spec, by layer kind.
pub fn init_weights<R: Rng>(
    spec: &InitSpec,
    kind: LayerKind,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f32>> {
    match spec.scheme {
        InitScheme::DefaultDcgan => init_default_dcgan(kind, n, rng),
        InitScheme::He => Ok(init_he(n, spec.fan_in, rng)),
        InitScheme::XavierNormalized => {
            Ok(init_xavier_normalized(n, spec.fan_in, spec.fan_out, rng))
        }
    }
}
