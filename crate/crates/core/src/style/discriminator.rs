//! Progressive critic mirroring the generator's levels: fromRGB taps per
//! resolution, downsampling blocks toward 4x4, linear output (WGAN critic).

use rand::Rng;

use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};
use crate::nn::Checkpoint;
use crate::style::equalized::{EqualizedConv2d, EqualizedDense};
use crate::style::generator::ProgressiveSchedule;
use crate::style::StyleConfig;

/// One downsampling step: channels[l] at res_l -> channels[l-1] at res_{l-1}.
struct DBlock {
    conv1: EqualizedConv2d,
    conv2: EqualizedConv2d,
}

impl DBlock {
    fn new<R: Rng>(in_c: usize, out_c: usize, rng: &mut R) -> Result<DBlock> {
        Ok(DBlock {
            conv1: EqualizedConv2d::new(in_c, in_c, 3, 1, 1, rng)?,
            conv2: EqualizedConv2d::new(in_c, out_c, 3, 1, 1, rng)?,
        })
    }

    fn forward(&self, x: &Tensor, leaky: f32) -> Result<Tensor> {
        let h = self.conv1.forward(x)?.leaky_relu(leaky)?;
        let h = self.conv2.forward(&h)?.leaky_relu(leaky)?;
        Ok(h.avg_pool(2, 2)?)
    }
}

pub struct StyleDiscriminator {
    from_rgb: Vec<EqualizedConv2d>,
    /// blocks[l-1] consumes level-l features (levels >= 1).
    blocks: Vec<DBlock>,
    final_conv: EqualizedConv2d,
    final_dense: EqualizedDense,
    cfg: StyleConfig,
}

impl StyleDiscriminator {
    pub fn new<R: Rng>(cfg: &StyleConfig, rng: &mut R) -> Result<StyleDiscriminator> {
        cfg.validate()?;
        let mut from_rgb = Vec::with_capacity(cfg.levels);
        for l in 0..cfg.levels {
            from_rgb.push(EqualizedConv2d::new(3, cfg.channels[l], 1, 1, 0, rng)?);
        }
        let mut blocks = Vec::new();
        for l in 1..cfg.levels {
            blocks.push(DBlock::new(cfg.channels[l], cfg.channels[l - 1], rng)?);
        }
        Ok(StyleDiscriminator {
            from_rgb,
            blocks,
            final_conv: EqualizedConv2d::new(cfg.channels[0], cfg.channels[0], 3, 1, 1, rng)?,
            final_dense: EqualizedDense::new(cfg.channels[0] * 16, 1, 0.0, rng)?,
            cfg: cfg.clone(),
        })
    }

    /// Critic scores [N,1] for images at the schedule's resolution. During a
    /// fade the downscaled input enters through the previous level's fromRGB
    /// and blends with the new block's output, mirroring the generator.
    pub fn forward(&self, x: &Tensor, schedule: &ProgressiveSchedule) -> Result<Tensor> {
        let level = schedule.level.min(self.cfg.levels - 1);
        let alpha = schedule.alpha.clamp(0.0, 1.0);
        let res = self.cfg.level_resolution(level);
        let shape = x.shape();
        if shape.len() != 4 || shape[1] != 3 || shape[2] != res || shape[3] != res {
            return Err(CoreError::InvalidInput(format!(
                "expected [N,3,{res},{res}] input at level {level}, got {shape:?}"
            )));
        }
        let leaky = self.cfg.leaky;
        let mut h = self.from_rgb[level].forward(x)?.leaky_relu(leaky)?;
        if level > 0 {
            h = self.blocks[level - 1].forward(&h, leaky)?;
            if alpha < 1.0 {
                let low = self.from_rgb[level - 1]
                    .forward(&x.avg_pool(2, 2)?)?
                    .leaky_relu(leaky)?;
                h = if alpha <= 0.0 {
                    low
                } else {
                    h.mul_scalar(alpha)?.add(&low.mul_scalar(1.0 - alpha)?)?
                };
            }
            for l in (1..level).rev() {
                h = self.blocks[l - 1].forward(&h, leaky)?;
            }
        }
        let h = self.final_conv.forward(&h)?.leaky_relu(leaky)?;
        let n = h.shape()[0];
        let flat = h.reshape(&[n, h.numel() / n])?;
        self.final_dense.forward(&flat)
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = Vec::new();
        for f in &self.from_rgb {
            p.extend(f.params());
        }
        for b in &self.blocks {
            p.extend(b.conv1.params());
            p.extend(b.conv2.params());
        }
        p.extend(self.final_conv.params());
        p.extend(self.final_dense.params());
        p
    }

    pub fn write_state(&self, ckpt: &mut Checkpoint, prefix: &str) {
        for (l, f) in self.from_rgb.iter().enumerate() {
            f.write_state(ckpt, &format!("{prefix}.fromrgb{l}"));
        }
        for (l, b) in self.blocks.iter().enumerate() {
            b.conv1.write_state(ckpt, &format!("{prefix}.block{l}.conv1"));
            b.conv2.write_state(ckpt, &format!("{prefix}.block{l}.conv2"));
        }
        self.final_conv.write_state(ckpt, &format!("{prefix}.final_conv"));
        self.final_dense.write_state(ckpt, &format!("{prefix}.final_dense"));
    }

    pub fn read_state(&self, ckpt: &Checkpoint, prefix: &str) -> Result<()> {
        for (l, f) in self.from_rgb.iter().enumerate() {
            f.read_state(ckpt, &format!("{prefix}.fromrgb{l}"))?;
        }
        for (l, b) in self.blocks.iter().enumerate() {
            b.conv1.read_state(ckpt, &format!("{prefix}.block{l}.conv1"))?;
            b.conv2.read_state(ckpt, &format!("{prefix}.block{l}.conv2"))?;
        }
        self.final_conv.read_state(ckpt, &format!("{prefix}.final_conv"))?;
        self.final_dense.read_state(ckpt, &format!("{prefix}.final_dense"))
    }
}
