//! Image loading, resizing and tensor conversion. All training images are
//! RGB; grayscale sources are expanded to three equal channels on load.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::RgbImage;

use albumgan_tensor::Tensor;

use crate::error::{DataError, Result};

/// One ingested image: id (source file stem or album id) plus u8 RGB pixels.
#[derive(Debug, Clone)]
pub struct ImageRecord {
    pub id: String,
    pub pixels: RgbImage,
}

/// Fixed resampling filter for every resize in the pipeline, recorded in
/// dataset metadata for reproducibility.
pub const RESAMPLING_FILTER: &str = "lanczos3";

pub fn load_image(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|source| DataError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8())
}

pub fn resize_rgb(img: &RgbImage, width: u32, height: u32) -> RgbImage {
    if img.width() == width && img.height() == height {
        return img.clone();
    }
    image::imageops::resize(img, width, height, FilterType::Lanczos3)
}

/// Paths of decodable-looking files directly inside `dir`, sorted by name so
/// every traversal is deterministic.
pub fn list_image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_dir(dir: &Path) -> Result<Vec<ImageRecord>> {
    let mut records = Vec::new();
    for path in list_image_files(dir)? {
        match load_image(&path) {
            Ok(pixels) => records.push(ImageRecord {
                id: path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                pixels,
            }),
            Err(e) => log::warn!("skipping unreadable image: {e}"),
        }
    }
    Ok(records)
}

/// [3,H,W] tensor scaled to [0,1].
pub fn to_unit_tensor(img: &RgbImage) -> Tensor {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut data = vec![0f32; 3 * h * w];
    for (x, y, p) in img.enumerate_pixels() {
        for c in 0..3 {
            data[c * h * w + y as usize * w + x as usize] = p.0[c] as f32 / 255.0;
        }
    }
    Tensor::from_vec(data, &[3, h, w]).expect("pixel data is finite")
}

/// [3,H,W] tensor in [0,1] back to u8 RGB, clamping out-of-range values.
pub fn unit_tensor_to_rgb(t: &Tensor) -> Result<RgbImage> {
    let shape = t.shape();
    if shape.len() != 3 || shape[0] != 3 {
        return Err(DataError::InvalidInput(format!(
            "expected [3,H,W] tensor, got {shape:?}"
        )));
    }
    let (h, w) = (shape[1], shape[2]);
    let d = t.data();
    let mut img = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let px = [
                (d[y * w + x].clamp(0.0, 1.0) * 255.0).round() as u8,
                (d[h * w + y * w + x].clamp(0.0, 1.0) * 255.0).round() as u8,
                (d[2 * h * w + y * w + x].clamp(0.0, 1.0) * 255.0).round() as u8,
            ];
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    Ok(img)
}
