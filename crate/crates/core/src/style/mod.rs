//! Toy style-based generator: latent mapping, AdaIN injection, pixelwise
//! normalization, progressive growing with fade-in, equalized learning rate
//! and truncation.

mod discriminator;
mod equalized;
mod generator;
pub(crate) mod train;
mod vector;

pub use discriminator::StyleDiscriminator;
pub use equalized::{EqualizedConv2d, EqualizedDense};
pub use generator::{MappingNetwork, ProgressiveSchedule, StyleGenerator, SynthesisNetwork};
pub use vector::StyleVector;

use rand::Rng;

use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};

pub const PIXEL_NORM_EPS: f32 = 1e-8;
pub const ADAIN_EPS: f32 = 1e-8;

/// Synthesis topology. `channels[l]` is the feature width at resolution
/// level l (level 0 is 4x4, each level doubles). Two styles per level.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleConfig {
    pub latent_dim: usize,
    pub levels: usize,
    pub channels: Vec<usize>,
    pub mapping_layers: usize,
    pub leaky: f32,
}

impl StyleConfig {
    /// Desk-scale default: 4x4 base growing to 32x32, 512-d latents.
    pub fn desk() -> StyleConfig {
        StyleConfig::with_levels(4, 512, 64)
    }

    /// 4 -> 4*2^(levels-1) resolution with channel widths halving from
    /// `base_channels` (floor 8).
    pub fn with_levels(levels: usize, latent_dim: usize, base_channels: usize) -> StyleConfig {
        let channels = (0..levels)
            .map(|l| (base_channels >> l).max(8))
            .collect();
        StyleConfig {
            latent_dim,
            levels,
            channels,
            mapping_layers: 3,
            leaky: 0.2,
        }
    }

    /// The thesis-scale 256x256 topology: 7 levels, 14 styles, 512-d
    /// latents. Constructible for shape checks; not trained in CI.
    pub fn full256() -> StyleConfig {
        StyleConfig {
            latent_dim: 512,
            levels: 7,
            channels: vec![512, 512, 256, 128, 64, 32, 16],
            mapping_layers: 3,
            leaky: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.latent_dim == 0 || self.mapping_layers == 0 {
            return Err(CoreError::InvalidConfig(
                "style config needs levels, latent_dim and mapping_layers >= 1".into(),
            ));
        }
        if self.channels.len() != self.levels {
            return Err(CoreError::InvalidConfig(format!(
                "channels list has {} entries for {} levels",
                self.channels.len(),
                self.levels
            )));
        }
        if !(0.0..1.0).contains(&self.leaky) || self.leaky == 0.0 {
            return Err(CoreError::InvalidConfig("leaky slope must be in (0,1)".into()));
        }
        Ok(())
    }

    /// Two style slots per resolution level.
    pub fn num_styles(&self) -> usize {
        2 * self.levels
    }

    pub fn resolution(&self) -> usize {
        self.level_resolution(self.levels - 1)
    }

    pub fn level_resolution(&self, level: usize) -> usize {
        4 << level
    }
}

/// Adaptive instance normalization: per channel, standardize with instance
/// statistics then apply style scale and bias:
/// out = y_s * (x - mu(x)) / sigma(x) + y_b. Population sigma; zero-variance
/// channels are epsilon-guarded.
pub fn adain(x: &Tensor, y_s: &Tensor, y_b: &Tensor) -> Result<Tensor> {
    let shape = x.shape();
    if shape.len() != 4 {
        return Err(CoreError::InvalidInput(format!(
            "adain expects [N,C,H,W], got {shape:?}"
        )));
    }
    let (n, c) = (shape[0], shape[1]);
    let ys = reshape_style(y_s, n, c, "y_s")?;
    let yb = reshape_style(y_b, n, c, "y_b")?;
    let mu = x.mean_axes(&[2, 3])?;
    let centered = x.sub(&mu)?;
    let var = centered.square()?.mean_axes(&[2, 3])?;
    let denom = var.add_scalar(ADAIN_EPS)?.sqrt()?;
    Ok(centered.div(&denom)?.mul(&ys)?.add(&yb)?)
}

fn reshape_style(y: &Tensor, n: usize, c: usize, name: &str) -> Result<Tensor> {
    match y.shape() {
        [yn, yc] if *yn == n && *yc == c => Ok(y.reshape(&[n, c, 1, 1])?),
        [yn, yc, 1, 1] if *yn == n && *yc == c => Ok(y.clone()),
        other => Err(CoreError::InvalidInput(format!(
            "{name} must have shape [{n},{c}], got {other:?}"
        ))),
    }
}

/// Pixelwise feature-vector normalization: divide each pixel's channel
/// vector by its RMS, sqrt(mean(x^2) + eps).
pub fn pixel_norm(x: &Tensor) -> Result<Tensor> {
    if x.shape().len() < 2 {
        return Err(CoreError::InvalidInput(
            "pixel_norm needs a channel axis (rank >= 2)".into(),
        ));
    }
    let ms = x.square()?.mean_axes(&[1])?;
    Ok(x.div(&ms.add_scalar(PIXEL_NORM_EPS)?.sqrt()?)?)
}

/// Re-samples latent components whose magnitude exceeds `tau` from N(0,1)
/// until every |z_i| <= tau. Components already inside the bound are kept.
pub fn truncate_z<R: Rng>(z: &mut [f32], tau: f32, rng: &mut R) -> Result<()> {
    if tau <= 0.0 {
        return Err(CoreError::InvalidConfig(format!(
            "truncation threshold must be positive, got {tau}"
        )));
    }
    for v in z.iter_mut() {
        while v.abs() > tau {
            let u1: f64 = 1.0 - rng.gen::<f64>();
            let u2: f64 = rng.gen();
            *v = ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32;
        }
    }
    Ok(())
}
