//! Dataset preparation: resize everything to a fixed resolution, expand
//! grayscale to RGB, write PNGs plus a JSON metadata sidecar with the
//! computed channel statistics.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{DataError, Result};
use crate::image_io::{load_image, resize_rgb, RESAMPLING_FILTER};
use crate::stats::{channel_stats, ChannelStats};

pub const METADATA_FILE: &str = "dataset.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub width: u32,
    pub height: u32,
    pub count: usize,
    pub stats: ChannelStats,
    pub filter: String,
}

/// Converts every readable image under `src` into a `width`x`height` RGB PNG
/// in `dest` (flat, named after the source file stem), skipping unreadable
/// files with a warning. Returns the number of images written. Re-running
/// with identical inputs produces byte-identical PNGs.
pub fn prepare_dataset(src: &Path, dest: &Path, width: u32, height: u32) -> Result<usize> {
    if !src.is_dir() {
        return Err(DataError::InvalidInput(format!(
            "source directory {} does not exist",
            src.display()
        )));
    }
    fs::create_dir_all(dest)?;

    let mut files: Vec<_> = WalkDir::new(src)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();

    let mut written = 0usize;
    let mut prepared = Vec::new();
    for path in files {
        // image::open also handles mode-L sources; to_rgb8 gives R=G=B
        let img = match load_image(&path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping unreadable file: {e}");
                continue;
            }
        };
        let resized = resize_rgb(&img, width, height);
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("img{written:06}"));
        let out_path = dest.join(format!("{stem}.png"));
        resized
            .save_with_format(&out_path, image::ImageFormat::Png)
            .map_err(|source| DataError::Image {
                path: out_path.clone(),
                source,
            })?;
        prepared.push(resized);
        written += 1;
    }

    let stats = if prepared.is_empty() {
        ChannelStats {
            mean: [0.0; 3],
            std: [0.0; 3],
        }
    } else {
        channel_stats(&prepared, 16)?
    };
    let meta = DatasetMeta {
        width,
        height,
        count: written,
        stats,
        filter: RESAMPLING_FILTER.to_string(),
    };
    let json = serde_json::to_string_pretty(&meta)?;
    fs::write(dest.join(METADATA_FILE), json)?;
    Ok(written)
}

pub fn load_metadata(dir: &Path) -> Result<DatasetMeta> {
    let raw = fs::read_to_string(dir.join(METADATA_FILE))?;
    Ok(serde_json::from_str(&raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma, Rgb, RgbImage};

    #[test]
    fn resizes_and_converts_to_png() {
        let src = tempfile::tempdir().unwrap();
        let dest = tempfile::tempdir().unwrap();
        let img = RgbImage::from_pixel(512, 512, Rgb([10, 200, 60]));
        img.save(src.path().join("a.png")).unwrap();

        let n = prepare_dataset(src.path(), dest.path(), 256, 256).unwrap();
        assert_eq!(n, 1);
        let out = image::open(dest.path().join("a.png")).unwrap().to_rgb8();
        assert_eq!((out.width(), out.height()), (256, 256));
        let meta = load_metadata(dest.path()).unwrap();
        assert_eq!(meta.count, 1);
        assert_eq!(meta.filter, "lanczos3");
    }

    #[test]
    fn grayscale_becomes_three_equal_channels() {
        let src = tempfile::tempdir().unwrap();
        let dest = tempfile::tempdir().unwrap();
        let gray = GrayImage::from_pixel(16, 16, Luma([77]));
        gray.save(src.path().join("g.png")).unwrap();

        prepare_dataset(src.path(), dest.path(), 8, 8).unwrap();
        let out = image::open(dest.path().join("g.png")).unwrap().to_rgb8();
        for p in out.pixels() {
            assert_eq!(p.0[0], p.0[1]);
            assert_eq!(p.0[1], p.0[2]);
        }
    }

    #[test]
    fn empty_source_succeeds_with_zero_count() {
        let src = tempfile::tempdir().unwrap();
        let dest = tempfile::tempdir().unwrap();
        let n = prepare_dataset(src.path(), dest.path(), 8, 8).unwrap();
        assert_eq!(n, 0);
        assert_eq!(load_metadata(dest.path()).unwrap().count, 0);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let src = tempfile::tempdir().unwrap();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let mut img = RgbImage::new(32, 32);
        for (i, p) in img.pixels_mut().enumerate() {
            *p = Rgb([(i % 251) as u8, (i % 127) as u8, (i % 83) as u8]);
        }
        img.save(src.path().join("x.png")).unwrap();

        prepare_dataset(src.path(), d1.path(), 16, 16).unwrap();
        prepare_dataset(src.path(), d2.path(), 16, 16).unwrap();
        let a = std::fs::read(d1.path().join("x.png")).unwrap();
        let b = std::fs::read(d2.path().join("x.png")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unreadable_files_are_skipped() {
        let src = tempfile::tempdir().unwrap();
        let dest = tempfile::tempdir().unwrap();
        std::fs::write(src.path().join("junk.png"), b"not an image").unwrap();
        let img = RgbImage::from_pixel(8, 8, Rgb([1, 2, 3]));
        img.save(src.path().join("ok.png")).unwrap();
        let n = prepare_dataset(src.path(), dest.path(), 8, 8).unwrap();
        assert_eq!(n, 1);
    }
}
