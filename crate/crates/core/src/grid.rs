//! Sample-grid rendering: tile a batch of generated images into one PNG.

use std::path::Path;

use image::RgbImage;

use albumgan_data::{denormalize, unit_tensor_to_rgb, ChannelStats, NormalizeMode};
use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};
use crate::train::split_batch;

/// Maps one normalized sample back to [0,1] according to the run's
/// normalization mode, clamping out-of-range values.
pub fn sample_to_unit(sample: &Tensor, mode: NormalizeMode, stats: &ChannelStats) -> Result<Tensor> {
    let unit = match mode {
        NormalizeMode::Unit => sample.clone(),
        NormalizeMode::HardcodedHalf => denormalize(&to_rgb3(sample)?, &ChannelStats::hardcoded_half())?,
        NormalizeMode::ComputedStats => denormalize(&to_rgb3(sample)?, stats)?,
    };
    Ok(unit)
}

// grayscale [1,H,W] samples are expanded to three channels for denormalize
fn to_rgb3(t: &Tensor) -> Result<Tensor> {
    let shape = t.shape();
    if shape.len() != 3 {
        return Err(CoreError::InvalidInput(format!(
            "expected [C,H,W] sample, got {shape:?}"
        )));
    }
    if shape[0] == 3 {
        return Ok(t.clone());
    }
    if shape[0] == 1 {
        let (h, w) = (shape[1], shape[2]);
        let d = t.to_vec();
        let mut out = Vec::with_capacity(3 * h * w);
        for _ in 0..3 {
            out.extend_from_slice(&d);
        }
        return Ok(Tensor::from_vec(out, &[3, h, w])?);
    }
    Err(CoreError::InvalidInput(format!(
        "unsupported channel count {}",
        shape[0]
    )))
}

/// Tiles a [N,C,H,W] batch into a near-square grid image.
pub fn render_grid(batch: &Tensor, mode: NormalizeMode, stats: &ChannelStats) -> Result<RgbImage> {
    let samples = split_batch(batch)?;
    let n = samples.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let mut tiles = Vec::with_capacity(n);
    for s in &samples {
        let unit = sample_to_unit(s, mode, stats)?;
        tiles.push(unit_tensor_to_rgb(&to_rgb3(&unit)?).map_err(CoreError::Data)?);
    }
    let (th, tw) = (tiles[0].height(), tiles[0].width());
    let mut canvas = RgbImage::new(cols as u32 * tw, rows as u32 * th);
    for (i, tile) in tiles.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        for (x, y, px) in tile.enumerate_pixels() {
            canvas.put_pixel(c as u32 * tw + x, r as u32 * th + y, *px);
        }
    }
    Ok(canvas)
}

pub fn save_sample_grid(
    batch: &Tensor,
    mode: NormalizeMode,
    stats: &ChannelStats,
    path: &Path,
) -> Result<()> {
    let img = render_grid(batch, mode, stats)?;
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
