//! Per-channel dataset statistics and normalization.
//!
//! The estimator mirrors the batch-mean scheme the training notebooks use:
//! accumulate the per-batch channel means of x and x^2 over [0,1]-scaled
//! pixels, then mean = E[X] and std = sqrt(E[X^2] - E[X]^2). With equal batch
//! sizes this equals the exact dataset statistics; ragged final batches bias
//! it slightly, which callers avoid by choosing a divisor batch size.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use albumgan_tensor::Tensor;

use crate::error::{DataError, Result};
use crate::image_io::to_unit_tensor;

/// Channel means and standard deviations in [0,1] pixel scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl ChannelStats {
    /// The hard-coded Celeba-style scheme: mean 0.5, std 0.5 per channel.
    pub fn hardcoded_half() -> ChannelStats {
        ChannelStats {
            mean: [0.5; 3],
            std: [0.5; 3],
        }
    }

    /// True when any channel's spread collapsed to (near) zero, in which case
    /// the stats cannot be used for normalization.
    pub fn is_degenerate(&self) -> bool {
        self.std.iter().any(|s| *s < 1e-6)
    }

    fn check_usable(&self) -> Result<()> {
        for (c, s) in self.std.iter().enumerate() {
            if *s < 1e-6 {
                return Err(DataError::DegenerateStats { channel: c });
            }
        }
        Ok(())
    }
}

/// How raw u8 images become training tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// x/255 only; generator outputs live in [0,1] (introductory model).
    Unit,
    /// (x/255 - 0.5) / 0.5, the tutorial's hard-coded scheme.
    HardcodedHalf,
    /// (x/255 - mean) / std with dataset-computed stats.
    ComputedStats,
}

/// Batch-mean channel statistics over a dataset of equally sized RGB images.
pub fn channel_stats(images: &[RgbImage], batch_size: usize) -> Result<ChannelStats> {
    if images.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let batch_size = batch_size.max(1);
    let mut sum = [0f64; 3];
    let mut sq_sum = [0f64; 3];
    let mut num_batches = 0usize;
    for batch in images.chunks(batch_size) {
        let mut batch_mean = [0f64; 3];
        let mut batch_sq = [0f64; 3];
        let mut count = 0f64;
        for img in batch {
            for p in img.pixels() {
                for c in 0..3 {
                    let v = p.0[c] as f64 / 255.0;
                    batch_mean[c] += v;
                    batch_sq[c] += v * v;
                }
            }
            count += (img.width() * img.height()) as f64;
        }
        for c in 0..3 {
            sum[c] += batch_mean[c] / count;
            sq_sum[c] += batch_sq[c] / count;
        }
        num_batches += 1;
    }
    let mut mean = [0f32; 3];
    let mut std = [0f32; 3];
    for c in 0..3 {
        let m = sum[c] / num_batches as f64;
        let var = (sq_sum[c] / num_batches as f64 - m * m).max(0.0);
        mean[c] = m as f32;
        std[c] = var.sqrt() as f32;
    }
    Ok(ChannelStats { mean, std })
}

/// Same estimator over already-normalized [3,H,W] float tensors, used to
/// re-measure a normalized dataset.
pub fn float_channel_stats(images: &[Tensor], batch_size: usize) -> Result<([f64; 3], [f64; 3])> {
    if images.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let batch_size = batch_size.max(1);
    let mut sum = [0f64; 3];
    let mut sq_sum = [0f64; 3];
    let mut num_batches = 0usize;
    for batch in images.chunks(batch_size) {
        let mut bm = [0f64; 3];
        let mut bs = [0f64; 3];
        let mut count = 0f64;
        for t in batch {
            let shape = t.shape();
            let (h, w) = (shape[1], shape[2]);
            let d = t.data();
            for c in 0..3 {
                for v in &d[c * h * w..(c + 1) * h * w] {
                    bm[c] += *v as f64;
                    bs[c] += (*v as f64) * (*v as f64);
                }
            }
            count += (h * w) as f64;
        }
        for c in 0..3 {
            sum[c] += bm[c] / count;
            sq_sum[c] += bs[c] / count;
        }
        num_batches += 1;
    }
    let mut mean = [0f64; 3];
    let mut std = [0f64; 3];
    for c in 0..3 {
        mean[c] = sum[c] / num_batches as f64;
        std[c] = (sq_sum[c] / num_batches as f64 - mean[c] * mean[c]).max(0.0).sqrt();
    }
    Ok((mean, std))
}

/// out = (x/255 - mean)/std per channel, as a [3,H,W] tensor.
pub fn normalize(img: &RgbImage, stats: &ChannelStats) -> Result<Tensor> {
    stats.check_usable()?;
    let unit = to_unit_tensor(img);
    normalize_unit(&unit, stats)
}

/// Normalizes an already [0,1]-scaled [3,H,W] tensor.
pub fn normalize_unit(unit: &Tensor, stats: &ChannelStats) -> Result<Tensor> {
    stats.check_usable()?;
    let shape = unit.shape();
    let (h, w) = (shape[1], shape[2]);
    let d = unit.data();
    let mut out = vec![0f32; d.len()];
    for c in 0..3 {
        let (m, s) = (stats.mean[c], stats.std[c]);
        for i in 0..h * w {
            out[c * h * w + i] = (d[c * h * w + i] - m) / s;
        }
    }
    drop(d);
    Ok(Tensor::from_vec(out, shape)?)
}

/// Inverse of `normalize`: back to [0,1] scale (not clamped).
pub fn denormalize(t: &Tensor, stats: &ChannelStats) -> Result<Tensor> {
    let shape = t.shape();
    if shape.len() != 3 || shape[0] != 3 {
        return Err(DataError::InvalidInput(format!(
            "expected [3,H,W] tensor, got {shape:?}"
        )));
    }
    let (h, w) = (shape[1], shape[2]);
    let d = t.data();
    let mut out = vec![0f32; d.len()];
    for c in 0..3 {
        let (m, s) = (stats.mean[c], stats.std[c]);
        for i in 0..h * w {
            out[c * h * w + i] = d[c * h * w + i] * s + m;
        }
    }
    drop(d);
    Ok(Tensor::from_vec(out, shape)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_dataset_is_degenerate_with_exact_mean() {
        // 0.5 in u8 is 127.5; use 128 and check against 128/255
        let imgs = vec![RgbImage::from_pixel(4, 4, Rgb([128, 128, 128])); 3];
        let s = channel_stats(&imgs, 2).unwrap();
        for c in 0..3 {
            assert!((s.mean[c] - 128.0 / 255.0).abs() < 1e-6);
            assert!(s.std[c].abs() < 1e-6);
        }
        assert!(s.is_degenerate());
        assert!(normalize(&imgs[0], &s).is_err());
    }

    #[test]
    fn two_known_images_match_exact_two_pass_oracle() {
        let mut a = RgbImage::new(2, 2);
        let mut b = RgbImage::new(2, 2);
        let pix_a = [[10u8, 20, 30], [40, 50, 60], [70, 80, 90], [100, 110, 120]];
        let pix_b = [[200u8, 190, 180], [170, 160, 150], [140, 130, 120], [5, 15, 25]];
        for (i, p) in pix_a.iter().enumerate() {
            a.put_pixel((i % 2) as u32, (i / 2) as u32, Rgb(*p));
        }
        for (i, p) in pix_b.iter().enumerate() {
            b.put_pixel((i % 2) as u32, (i / 2) as u32, Rgb(*p));
        }

        // exact two-pass oracle over the full dataset
        let mut all = [[0f64; 8]; 3];
        for c in 0..3 {
            for i in 0..4 {
                all[c][i] = pix_a[i][c] as f64 / 255.0;
                all[c][4 + i] = pix_b[i][c] as f64 / 255.0;
            }
        }
        let s = channel_stats(&[a, b], 2).unwrap();
        for c in 0..3 {
            let mean: f64 = all[c].iter().sum::<f64>() / 8.0;
            let var: f64 = all[c].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 8.0;
            assert!((s.mean[c] as f64 - mean).abs() < 1e-6, "channel {c} mean");
            assert!((s.std[c] as f64 - var.sqrt()).abs() < 1e-6, "channel {c} std");
        }
    }

    #[test]
    fn hardcoded_half_maps_extremes_to_unit_range() {
        let stats = ChannelStats::hardcoded_half();
        let mut img = RgbImage::new(1, 2);
        img.put_pixel(0, 0, Rgb([255, 255, 255]));
        img.put_pixel(0, 1, Rgb([0, 0, 0]));
        let t = normalize(&img, &stats).unwrap();
        let d = t.to_vec();
        // channel 0: pixel 255 -> 1.0, pixel 0 -> -1.0
        assert!((d[0] - 1.0).abs() < 1e-6);
        assert!((d[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn pixel_at_scaled_mean_maps_to_zero() {
        let stats = ChannelStats {
            mean: [0.4; 3],
            std: [0.25; 3],
        };
        // pixel value 255*mean = 102
        let img = RgbImage::from_pixel(1, 1, Rgb([102, 102, 102]));
        let t = normalize(&img, &stats).unwrap();
        for v in t.to_vec() {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn normalize_denormalize_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut img = RgbImage::new(5, 5);
        for p in img.pixels_mut() {
            *p = Rgb([rng.gen(), rng.gen(), rng.gen()]);
        }
        let stats = ChannelStats {
            mean: [0.3, 0.5, 0.7],
            std: [0.2, 0.4, 0.6],
        };
        let norm = normalize(&img, &stats).unwrap();
        let back = denormalize(&norm, &stats).unwrap();
        let unit = to_unit_tensor(&img);
        for (a, b) in back.to_vec().iter().zip(unit.to_vec()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn stats_permutation_invariant_with_equal_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let imgs: Vec<RgbImage> = (0..8)
            .map(|_| {
                let mut img = RgbImage::new(3, 3);
                for p in img.pixels_mut() {
                    *p = Rgb([rng.gen(), rng.gen(), rng.gen()]);
                }
                img
            })
            .collect();
        let mut shuffled = imgs.clone();
        shuffled.reverse();
        shuffled.swap(0, 3);
        let a = channel_stats(&imgs, 4).unwrap();
        let b = channel_stats(&shuffled, 4).unwrap();
        for c in 0..3 {
            assert!((a.mean[c] - b.mean[c]).abs() < 1e-6);
            assert!((a.std[c] - b.std[c]).abs() < 1e-6);
        }
    }
}
