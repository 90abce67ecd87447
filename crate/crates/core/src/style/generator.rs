//! Style-based generator: mapping network, AdaIN-injected synthesis blocks,
//! progressive growing with fade-in.

use rand::Rng;

use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};
use crate::nn::Checkpoint;
use crate::style::equalized::{EqualizedConv2d, EqualizedDense};
use crate::style::vector::StyleVector;
use crate::style::{adain, pixel_norm, StyleConfig};

/// Where in the progressive schedule a forward pass happens: the active
/// resolution level and the fade weight blending the previous level in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressiveSchedule {
    pub level: usize,
    pub alpha: f32,
    pub images_per_phase: u64,
}

impl ProgressiveSchedule {
    /// Fully faded-in schedule at the final level.
    pub fn full(levels: usize) -> ProgressiveSchedule {
        ProgressiveSchedule {
            level: levels.saturating_sub(1),
            alpha: 1.0,
            images_per_phase: 0,
        }
    }

    /// Schedule after `images_shown` reals: level 0 trains alone for one
    /// phase, then each higher level fades in (alpha linear in images)
    /// for one phase and stabilizes for another.
    pub fn at_images(images_shown: u64, levels: usize, images_per_phase: u64) -> ProgressiveSchedule {
        let ipp = images_per_phase.max(1);
        let mut remaining = images_shown;
        // level 0 stabilization phase
        if remaining < ipp || levels == 1 {
            return ProgressiveSchedule {
                level: 0,
                alpha: 1.0,
                images_per_phase: ipp,
            };
        }
        remaining -= ipp;
        for level in 1..levels {
            if remaining < ipp {
                return ProgressiveSchedule {
                    level,
                    alpha: (remaining as f32 / ipp as f32).clamp(0.0, 1.0),
                    images_per_phase: ipp,
                };
            }
            remaining -= ipp;
            if remaining < ipp {
                return ProgressiveSchedule {
                    level,
                    alpha: 1.0,
                    images_per_phase: ipp,
                };
            }
            remaining -= ipp;
        }
        ProgressiveSchedule {
            level: levels - 1,
            alpha: 1.0,
            images_per_phase: ipp,
        }
    }
}

/// z -> w through a small stack of equalized dense layers.
pub struct MappingNetwork {
    layers: Vec<EqualizedDense>,
    leaky: f32,
}

impl MappingNetwork {
    pub fn new<R: Rng>(cfg: &StyleConfig, rng: &mut R) -> Result<MappingNetwork> {
        let mut layers = Vec::with_capacity(cfg.mapping_layers);
        for _ in 0..cfg.mapping_layers {
            layers.push(EqualizedDense::new(cfg.latent_dim, cfg.latent_dim, 0.0, rng)?);
        }
        Ok(MappingNetwork {
            layers,
            leaky: cfg.leaky,
        })
    }

    /// [N,L] -> [N,L].
    pub fn forward(&self, z: &Tensor) -> Result<Tensor> {
        let mut h = z.clone();
        for layer in &self.layers {
            h = layer.forward(&h)?.leaky_relu(self.leaky)?;
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }
}

/// Per-injection affine pair mapping a w row to channel scales and biases.
/// The scale head's bias starts at 1 so styles begin as identity.
struct StyleAffine {
    ys: EqualizedDense,
    yb: EqualizedDense,
}

impl StyleAffine {
    fn new<R: Rng>(latent: usize, channels: usize, rng: &mut R) -> Result<StyleAffine> {
        Ok(StyleAffine {
            ys: EqualizedDense::new(latent, channels, 1.0, rng)?,
            yb: EqualizedDense::new(latent, channels, 0.0, rng)?,
        })
    }

    fn forward(&self, w_row: &Tensor) -> Result<(Tensor, Tensor)> {
        Ok((self.ys.forward(w_row)?, self.yb.forward(w_row)?))
    }

    fn params(&self) -> Vec<Tensor> {
        let mut p = self.ys.params();
        p.extend(self.yb.params());
        p
    }

    fn write_state(&self, ckpt: &mut Checkpoint, prefix: &str) {
        self.ys.write_state(ckpt, &format!("{prefix}.ys"));
        self.yb.write_state(ckpt, &format!("{prefix}.yb"));
    }

    fn read_state(&self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        self.ys.read_state(ckpt, &format!("{prefix}.ys"))?;
        self.yb.read_state(ckpt, &format!("{prefix}.yb"))
    }
}

/// One resolution level: two conv+AdaIN injections (two styles per level).
struct SynthBlock {
    conv1: EqualizedConv2d,
    affine1: StyleAffine,
    conv2: EqualizedConv2d,
    affine2: StyleAffine,
}

impl SynthBlock {
    fn new<R: Rng>(in_c: usize, out_c: usize, latent: usize, rng: &mut R) -> Result<SynthBlock> {
        Ok(SynthBlock {
            conv1: EqualizedConv2d::new(in_c, out_c, 3, 1, 1, rng)?,
            affine1: StyleAffine::new(latent, out_c, rng)?,
            conv2: EqualizedConv2d::new(out_c, out_c, 3, 1, 1, rng)?,
            affine2: StyleAffine::new(latent, out_c, rng)?,
        })
    }

    fn forward(&self, x: &Tensor, w_a: &Tensor, w_b: &Tensor, leaky: f32) -> Result<Tensor> {
        let h = pixel_norm(&self.conv1.forward(x)?.leaky_relu(leaky)?)?;
        let (ys, yb) = self.affine1.forward(w_a)?;
        let h = adain(&h, &ys, &yb)?;
        let h = pixel_norm(&self.conv2.forward(&h)?.leaky_relu(leaky)?)?;
        let (ys, yb) = self.affine2.forward(w_b)?;
        adain(&h, &ys, &yb)
    }

    fn params(&self) -> Vec<Tensor> {
        let mut p = self.conv1.params();
        p.extend(self.affine1.params());
        p.extend(self.conv2.params());
        p.extend(self.affine2.params());
        p
    }
}

pub struct SynthesisNetwork {
    base: Tensor, // learned constant input [1,c0,4,4]
    blocks: Vec<SynthBlock>,
    to_rgb: Vec<EqualizedConv2d>,
    cfg: StyleConfig,
}

impl SynthesisNetwork {
    pub fn new<R: Rng>(cfg: &StyleConfig, rng: &mut R) -> Result<SynthesisNetwork> {
        let mut blocks = Vec::with_capacity(cfg.levels);
        let mut to_rgb = Vec::with_capacity(cfg.levels);
        for l in 0..cfg.levels {
            let in_c = if l == 0 { cfg.channels[0] } else { cfg.channels[l - 1] };
            blocks.push(SynthBlock::new(in_c, cfg.channels[l], cfg.latent_dim, rng)?);
            to_rgb.push(EqualizedConv2d::new(cfg.channels[l], 3, 1, 1, 0, rng)?);
        }
        Ok(SynthesisNetwork {
            base: Tensor::ones(&[1, cfg.channels[0], 4, 4]).requires_grad(),
            blocks,
            to_rgb,
            cfg: cfg.clone(),
        })
    }

    fn style_row(w: &Tensor, idx: usize) -> Result<Tensor> {
        let n = w.shape()[0];
        let l = w.shape()[2];
        Ok(w.narrow(1, idx, 1)?.reshape(&[n, l])?)
    }

    /// Renders a batch of style matrices [N, num_styles, latent] into images
    /// at the schedule's level. out = alpha * tanh(rgb_new) +
    /// (1-alpha) * upsample(tanh(rgb_prev)): blending per-path tanh outputs
    /// keeps the result inside [-1,1] and makes alpha=0 bit-equal to the
    /// upsampled previous-level image (nearest-neighbour upsampling commutes
    /// with elementwise tanh).
    pub fn forward(&self, w: &Tensor, schedule: &ProgressiveSchedule) -> Result<Tensor> {
        let shape = w.shape();
        if shape.len() != 3 || shape[1] != self.cfg.num_styles() || shape[2] != self.cfg.latent_dim {
            return Err(CoreError::InvalidInput(format!(
                "expected w of shape [N,{},{}], got {shape:?}",
                self.cfg.num_styles(),
                self.cfg.latent_dim
            )));
        }
        let n = shape[0];
        let level = schedule.level.min(self.cfg.levels - 1);
        let alpha = schedule.alpha.clamp(0.0, 1.0);

        let mut x = self.base.broadcast_to(&[n, self.cfg.channels[0], 4, 4])?;
        let mut prev = None;
        for l in 0..=level {
            if l > 0 {
                prev = Some(x.clone());
                x = x.upsample_nearest(2)?;
            }
            let w_a = Self::style_row(w, 2 * l)?;
            let w_b = Self::style_row(w, 2 * l + 1)?;
            x = self.blocks[l].forward(&x, &w_a, &w_b, self.cfg.leaky)?;
        }

        let new_img = self.to_rgb[level].forward(&x)?.tanh()?;
        if level == 0 || alpha >= 1.0 {
            return Ok(new_img);
        }
        let prev = prev.expect("level > 0 always sets prev");
        let old_img = self.to_rgb[level - 1].forward(&prev)?.tanh()?.upsample_nearest(2)?;
        if alpha <= 0.0 {
            return Ok(old_img);
        }
        Ok(new_img.mul_scalar(alpha)?.add(&old_img.mul_scalar(1.0 - alpha)?)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = vec![self.base.clone()];
        for b in &self.blocks {
            p.extend(b.params());
        }
        for r in &self.to_rgb {
            p.extend(r.params());
        }
        p
    }
}

/// Mapping network plus synthesis network.
pub struct StyleGenerator {
    pub cfg: StyleConfig,
    pub mapping: MappingNetwork,
    pub synthesis: SynthesisNetwork,
}

impl StyleGenerator {
    pub fn new<R: Rng>(cfg: &StyleConfig, rng: &mut R) -> Result<StyleGenerator> {
        cfg.validate()?;
        Ok(StyleGenerator {
            cfg: cfg.clone(),
            mapping: MappingNetwork::new(cfg, rng)?,
            synthesis: SynthesisNetwork::new(cfg, rng)?,
        })
    }

    /// Maps latents [N,L] to style tensors [N,S,L]; every style row is the
    /// mapper output (rows identical before mixing).
    pub fn map_latent(&self, z: &Tensor) -> Result<Tensor> {
        let shape = z.shape();
        if shape.len() != 2 || shape[1] != self.cfg.latent_dim {
            return Err(CoreError::InvalidInput(format!(
                "expected z of shape [N,{}], got {shape:?}",
                self.cfg.latent_dim
            )));
        }
        let n = shape[0];
        let w = self.mapping.forward(z)?;
        Ok(w.reshape(&[n, 1, self.cfg.latent_dim])?
            .broadcast_to(&[n, self.cfg.num_styles(), self.cfg.latent_dim])?)
    }

    /// Single-latent convenience returning the plain StyleVector.
    pub fn map_latent_vec(&self, z: &[f32]) -> Result<StyleVector> {
        let zt = Tensor::from_vec(z.to_vec(), &[1, self.cfg.latent_dim])?;
        let row = self.mapping.forward(&zt)?.to_vec();
        Ok(StyleVector::broadcast(self.cfg.num_styles(), &row))
    }

    pub fn generate(&self, z: &Tensor, schedule: &ProgressiveSchedule) -> Result<Tensor> {
        let w = self.map_latent(z)?;
        self.synthesis.forward(&w, schedule)
    }

    /// Mean mapper output over `samples` standard-normal latents; the shared
    /// initialization for projection.
    pub fn mean_w<R: Rng>(&self, samples: usize, rng: &mut R) -> Result<Vec<f32>> {
        let l = self.cfg.latent_dim;
        let mut acc = vec![0f64; l];
        let chunk = 64usize;
        let mut done = 0usize;
        while done < samples {
            let n = chunk.min(samples - done);
            let z = Tensor::randn(&[n, l], rng);
            let w = self.mapping.forward(&z)?;
            let d = w.data();
            for r in 0..n {
                for c in 0..l {
                    acc[c] += d[r * l + c] as f64;
                }
            }
            done += n;
        }
        Ok(acc.into_iter().map(|v| (v / samples as f64) as f32).collect())
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = self.mapping.params();
        p.extend(self.synthesis.params());
        p
    }

    pub fn write_state(&self, ckpt: &mut Checkpoint, prefix: &str) {
        for (i, layer) in self.mapping.layers.iter().enumerate() {
            layer.write_state(ckpt, &format!("{prefix}.map.{i}"));
        }
        crate::nn::put(ckpt, format!("{prefix}.base"), &self.synthesis.base);
        for (l, block) in self.synthesis.blocks.iter().enumerate() {
            block.conv1.write_state(ckpt, &format!("{prefix}.block{l}.conv1"));
            block.affine1.write_state(ckpt, &format!("{prefix}.block{l}.affine1"));
            block.conv2.write_state(ckpt, &format!("{prefix}.block{l}.conv2"));
            block.affine2.write_state(ckpt, &format!("{prefix}.block{l}.affine2"));
        }
        for (l, rgb) in self.synthesis.to_rgb.iter().enumerate() {
            rgb.write_state(ckpt, &format!("{prefix}.torgb{l}"));
        }
    }

    pub fn read_state(&self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        for (i, layer) in self.mapping.layers.iter().enumerate() {
            layer.read_state(ckpt, &format!("{prefix}.map.{i}"))?;
        }
        crate::nn::take(ckpt, format!("{prefix}.base"), &self.synthesis.base)?;
        for (l, block) in self.synthesis.blocks.iter().enumerate() {
            block.conv1.read_state(ckpt, &format!("{prefix}.block{l}.conv1"))?;
            block.affine1.read_state(ckpt, &format!("{prefix}.block{l}.affine1"))?;
            block.conv2.read_state(ckpt, &format!("{prefix}.block{l}.conv2"))?;
            block.affine2.read_state(ckpt, &format!("{prefix}.block{l}.affine2"))?;
        }
        for (l, rgb) in self.synthesis.to_rgb.iter().enumerate() {
            rgb.read_state(ckpt, &format!("{prefix}.torgb{l}"))?;
        }
        Ok(())
    }
}
