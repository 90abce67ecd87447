//! Adaptive discriminator augmentation: the augmentation pipeline applied to
//! both real and fake batches, the r_t overfitting estimate, and the p
//! controller.

use rand::Rng;

use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};

/// Enabled augmentation categories. Each is applied independently with
/// probability p per image, so several can stack. Flips and 90-degree
/// rotations are exactly invertible; translation is invertible up to the
/// zero-filled border; brightness and saturation are invertible affine maps.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPipeline {
    pub flip: bool,
    pub rotate90: bool,
    pub translate: bool,
    pub brightness: bool,
    pub saturation: bool,
    /// Translation limit as a fraction of the image side (<= 12.5%).
    pub max_translate_frac: f32,
}

impl Default for AugmentPipeline {
    fn default() -> AugmentPipeline {
        AugmentPipeline {
            flip: true,
            rotate90: true,
            translate: true,
            brightness: true,
            saturation: true,
            max_translate_frac: 0.125,
        }
    }
}

impl AugmentPipeline {
    pub fn flip_only() -> AugmentPipeline {
        AugmentPipeline {
            flip: true,
            rotate90: false,
            translate: false,
            brightness: false,
            saturation: false,
            max_translate_frac: 0.125,
        }
    }
}

/// Augments a batch [N,C,H,W]; every enabled category fires independently
/// with probability `p` per image. Differentiable, so generator gradients
/// flow through augmented fakes.
pub fn augment<R: Rng>(
    batch: &Tensor,
    pipeline: &AugmentPipeline,
    p: f32,
    rng: &mut R,
) -> Result<Tensor> {
    let shape = batch.shape();
    if shape.len() != 4 {
        return Err(CoreError::InvalidInput(format!(
            "augment expects [N,C,H,W], got {shape:?}"
        )));
    }
    let (n, h, w) = (shape[0], shape[2], shape[3]);
    let p = p.clamp(0.0, 1.0);
    let mut parts = Vec::with_capacity(n);
    for i in 0..n {
        let mut img = batch.narrow(0, i, 1)?;
        if pipeline.flip && rng.gen::<f32>() < p {
            img = img.flip_h()?;
        }
        if pipeline.rotate90 && rng.gen::<f32>() < p {
            let k = rng.gen_range(1..4u8);
            img = img.rot90(k)?;
        }
        if pipeline.translate && rng.gen::<f32>() < p {
            let max_dx = ((w as f32 * pipeline.max_translate_frac).floor() as isize).max(1);
            let max_dy = ((h as f32 * pipeline.max_translate_frac).floor() as isize).max(1);
            let dx = rng.gen_range(-max_dx..=max_dx);
            let dy = rng.gen_range(-max_dy..=max_dy);
            img = img.translate(dx, dy)?;
        }
        if pipeline.brightness && rng.gen::<f32>() < p {
            let delta = rng.gen_range(-0.2..0.2f32);
            img = img.add_scalar(delta)?;
        }
        if pipeline.saturation && rng.gen::<f32>() < p {
            let s = rng.gen_range(0.5..2.0f32);
            let gray = img.mean_axes(&[1])?;
            img = gray.add(&img.sub(&gray)?.mul_scalar(s)?)?;
        }
        parts.push(img);
    }
    Ok(Tensor::concat0(&parts)?)
}

/// Augments the real and fake halves of one discriminator step with the
/// same pipeline configuration and the same p (fresh draws each).
pub fn augment_pair<R: Rng>(
    reals: &Tensor,
    fakes: &Tensor,
    pipeline: &AugmentPipeline,
    p: f32,
    rng: &mut R,
) -> Result<(Tensor, Tensor)> {
    Ok((
        augment(reals, pipeline, p, rng)?,
        augment(fakes, pipeline, p, rng)?,
    ))
}

/// r_t = E[sign(D(reals))]: mean elementwise sign of the discriminator's
/// outputs on the (augmented) real batch.
pub fn rt_estimate(d_outputs_on_reals: &[f32]) -> f32 {
    if d_outputs_on_reals.is_empty() {
        return 0.0;
    }
    let s: f32 = d_outputs_on_reals.iter().map(|v| v.signum()).sum();
    s / d_outputs_on_reals.len() as f32
}

/// Augmentation probability controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaState {
    /// Augmentation probability, clamped to [0, 0.999].
    pub p: f32,
    /// Latest (smoothed) overfitting estimate.
    pub rt: f32,
    /// Target r_t (0.6 works across datasets).
    pub target: f32,
    /// Adjustment increment per update.
    pub step: f32,
}

impl AdaState {
    pub fn new(target: f32, step: f32) -> AdaState {
        AdaState {
            p: 0.0,
            rt: 0.0,
            target,
            step,
        }
    }
}

/// One controller update: overfitting above target augments more, below
/// augments less.
pub fn adjust_p(state: &mut AdaState, rt: f32) {
    state.rt = rt;
    if rt > state.target {
        state.p += state.step;
    } else if rt < state.target {
        state.p -= state.step;
    }
    state.p = state.p.clamp(0.0, 0.999);
}

/// Controller parameters used by the style trainer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaConfig {
    pub target: f32,
    pub step: f32,
    /// Adjust p once per this many discriminator steps.
    pub every: usize,
    /// EMA decay applied to raw batch r_t before comparison.
    pub ema_decay: f32,
}

impl Default for AdaConfig {
    fn default() -> AdaConfig {
        AdaConfig {
            target: 0.6,
            step: 0.005,
            every: 4,
            ema_decay: 0.95,
        }
    }
}

/// Trainer-side wrapper: smooths raw per-batch r_t with an EMA and adjusts
/// p every `every` observations.
#[derive(Debug, Clone)]
pub struct AdaController {
    pub state: AdaState,
    cfg: AdaConfig,
    ema: f32,
    seen: usize,
}

impl AdaController {
    pub fn new(cfg: AdaConfig) -> AdaController {
        AdaController {
            state: AdaState::new(cfg.target, cfg.step),
            cfg,
            ema: 0.0,
            seen: 0,
        }
    }

    /// Feed one batch estimate; returns true when p was adjusted.
    pub fn observe(&mut self, rt_batch: f32) -> bool {
        self.ema = self.cfg.ema_decay * self.ema + (1.0 - self.cfg.ema_decay) * rt_batch;
        self.seen += 1;
        if self.seen % self.cfg.every == 0 {
            adjust_p(&mut self.state, self.ema);
            true
        } else {
            false
        }
    }

    pub fn p(&self) -> f32 {
        self.state.p
    }

    pub fn rt(&self) -> f32 {
        self.state.rt
    }
}
