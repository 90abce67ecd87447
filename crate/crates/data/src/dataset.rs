//! In-memory training dataset: normalized [C,H,W] tensors plus metadata.

use std::path::Path;

use albumgan_tensor::Tensor;

use crate::error::{DataError, Result};
use crate::image_io::{load_image, list_image_files, to_unit_tensor};
use crate::prepare::{load_metadata, DatasetMeta};
use crate::stats::{normalize_unit, ChannelStats, NormalizeMode};

pub struct Dataset {
    images: Vec<Tensor>,
    meta: Option<DatasetMeta>,
    stats: ChannelStats,
    mode: NormalizeMode,
}

impl Dataset {
    /// Loads a prepared directory (PNGs + sidecar). `channels` is 1 for
    /// grayscale models (RGB is collapsed by channel mean) or 3.
    pub fn load(dir: &Path, mode: NormalizeMode, channels: usize) -> Result<Dataset> {
        let meta = load_metadata(dir).ok();
        let stats = match mode {
            NormalizeMode::Unit => ChannelStats {
                mean: [0.0; 3],
                std: [1.0; 3],
            },
            NormalizeMode::HardcodedHalf => ChannelStats::hardcoded_half(),
            NormalizeMode::ComputedStats => meta
                .as_ref()
                .map(|m| m.stats.clone())
                .ok_or_else(|| {
                    DataError::InvalidInput(
                        "computed-stats normalization requires the dataset metadata sidecar".into(),
                    )
                })?,
        };
        let mut images = Vec::new();
        for path in list_image_files(dir)? {
            if path.extension().map(|e| e != "png").unwrap_or(true) {
                continue;
            }
            let img = load_image(&path)?;
            let unit = to_unit_tensor(&img);
            let normalized = match mode {
                NormalizeMode::Unit => unit,
                _ => normalize_unit(&unit, &stats)?,
            };
            images.push(collapse_channels(&normalized, channels)?);
        }
        if images.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        Ok(Dataset {
            images,
            meta,
            stats,
            mode,
        })
    }

    /// Wraps pre-built tensors (synthetic fixtures, tests).
    pub fn from_tensors(images: Vec<Tensor>, mode: NormalizeMode) -> Result<Dataset> {
        if images.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        let stats = match mode {
            NormalizeMode::HardcodedHalf => ChannelStats::hardcoded_half(),
            _ => ChannelStats {
                mean: [0.0; 3],
                std: [1.0; 3],
            },
        };
        Ok(Dataset {
            images,
            meta: None,
            stats,
            mode,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Tensor] {
        &self.images
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.images[i]
    }

    pub fn meta(&self) -> Option<&DatasetMeta> {
        self.meta.as_ref()
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn mode(&self) -> NormalizeMode {
        self.mode
    }

    /// Image shape [C,H,W] of the first element.
    pub fn image_shape(&self) -> &[usize] {
        self.images[0].shape()
    }
}

fn collapse_channels(t: &Tensor, channels: usize) -> Result<Tensor> {
    let shape = t.shape();
    match channels {
        3 => Ok(t.clone()),
        1 => {
            let (h, w) = (shape[1], shape[2]);
            let d = t.data();
            let mut out = vec![0f32; h * w];
            for i in 0..h * w {
                out[i] = (d[i] + d[h * w + i] + d[2 * h * w + i]) / 3.0;
            }
            drop(d);
            Ok(Tensor::from_vec(out, &[1, h, w])?)
        }
        other => Err(DataError::InvalidInput(format!(
            "unsupported channel count {other}"
        ))),
    }
}
