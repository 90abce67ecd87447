//! Toy Frechet distance: features from a small fixed-weight conv extractor,
//! Gaussian fits, and the matrix-square-root distance between them.
//!
//! The extractor replaces the usual pretrained classifier at desk scale, so
//! scores are comparable only to other runs of this toolkit.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use albumgan_data::{list_image_files, load_image, resize_rgb, to_unit_tensor};
use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};
use crate::nn::{Checkpoint, Conv2d, InitScheme};
use crate::train::stack_samples;

/// Feature dimensionality of the bundled extractor.
pub const FEATURE_DIM: usize = 64;
/// Extractor input resolution; images are resized to this before extraction.
pub const EXTRACTOR_INPUT: usize = 32;
const EXTRACTOR_SEED: u64 = 17;

/// Small conv net with fixed seeded weights. Deterministic: the same build
/// always produces identical features.
pub struct ToyExtractor {
    convs: Vec<Conv2d>,
    id: String,
}

impl ToyExtractor {
    /// The bundled extractor (seed recorded in its id).
    pub fn bundled() -> Result<ToyExtractor> {
        let mut rng = ChaCha8Rng::seed_from_u64(EXTRACTOR_SEED);
        let dims = [(3usize, 16usize), (16, 32), (32, FEATURE_DIM)];
        let mut convs = Vec::new();
        for (cin, cout) in dims {
            convs.push(Conv2d::new(cin, cout, 3, 2, 1, InitScheme::He, &mut rng)?);
        }
        Ok(ToyExtractor {
            convs,
            id: format!("toyconv{FEATURE_DIM}-seed{EXTRACTOR_SEED}"),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ckpt = Checkpoint::new();
        for (i, c) in self.convs.iter().enumerate() {
            crate::nn::put(&mut ckpt, format!("extractor.{i}.w"), &c.w);
            crate::nn::put(&mut ckpt, format!("extractor.{i}.b"), &c.b);
        }
        ckpt.save(path)
    }

    /// n x d feature matrix for [3,32,32] unit-scaled images. Identical
    /// images give identical rows; permuting inputs permutes rows.
    pub fn extract_features(&self, images: &[Tensor]) -> Result<Vec<Vec<f32>>> {
        if images.is_empty() {
            return Err(CoreError::InvalidInput("no images to extract from".into()));
        }
        for t in images {
            if t.shape() != [3, EXTRACTOR_INPUT, EXTRACTOR_INPUT] {
                return Err(CoreError::InvalidInput(format!(
                    "extractor expects [3,{EXTRACTOR_INPUT},{EXTRACTOR_INPUT}] images, got {:?}",
                    t.shape()
                )));
            }
        }
        let mut rows = Vec::with_capacity(images.len());
        for chunk in images.chunks(32) {
            let mut x = stack_samples(chunk)?;
            for conv in &self.convs {
                x = conv.forward(&x)?.leaky_relu(0.2)?;
            }
            let n = x.shape()[0];
            let pooled = x.mean_axes(&[2, 3])?.reshape(&[n, FEATURE_DIM])?;
            let d = pooled.data();
            for i in 0..n {
                rows.push(d[i * FEATURE_DIM..(i + 1) * FEATURE_DIM].to_vec());
            }
        }
        Ok(rows)
    }
}

/// Gaussian fit of a feature set: mean vector and sample covariance
/// (symmetrized; eigenvalues must be >= -1e-8 relative to scale).
#[derive(Debug, Clone)]
pub struct FeatureStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl FeatureStats {
    pub fn from_features(features: &[Vec<f32>]) -> Result<FeatureStats> {
        let n = features.len();
        if n < 2 {
            return Err(CoreError::InvalidInput(
                "feature statistics need at least two samples".into(),
            ));
        }
        let d = features[0].len();
        let mut mean = vec![0f64; d];
        for row in features {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut cov = DMatrix::zeros(d, d);
        for row in features {
            let centered: Vec<f64> = row.iter().zip(&mean).map(|(&v, m)| v as f64 - m).collect();
            for i in 0..d {
                for j in i..d {
                    cov[(i, j)] += centered[i] * centered[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(FeatureStats {
            mean: DVector::from_vec(mean),
            cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_psd(&self) -> Result<()> {
        let eig = self.cov.clone().symmetric_eigen();
        let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let tol = 1e-8 * max.max(1.0);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(CoreError::InvalidInput(format!(
                "covariance is not PSD within tolerance (min eigenvalue {min:.3e})"
            )));
        }
        Ok(())
    }
}

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clamped at 0.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let sqrt_vals: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let d = DMatrix::from_diagonal(&DVector::from_vec(sqrt_vals));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2), clamped at 0
/// against rounding. Zero iff the Gaussians coincide.
pub fn frechet_distance(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(CoreError::InvalidInput(format!(
            "feature dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    a.check_psd()?;
    b.check_psd()?;
    let diff = &a.mean - &b.mean;
    let mean_term = diff.dot(&diff);
    let sa_half = sqrtm_psd(&a.cov);
    let inner = &sa_half * &b.cov * &sa_half;
    let cross = sqrtm_psd(&inner);
    let trace_term = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    Ok((mean_term + trace_term).max(0.0))
}

#[derive(Debug, Serialize)]
pub struct FidReport {
    pub fid: f64,
    pub n_real: usize,
    pub n_fake: usize,
    pub extractor_id: String,
    pub warnings: Vec<String>,
}

fn load_feature_images(dir: &Path) -> Result<Vec<Tensor>> {
    let mut out = Vec::new();
    for path in list_image_files(dir).map_err(CoreError::Data)? {
        let img = match load_image(&path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let resized = resize_rgb(&img, EXTRACTOR_INPUT as u32, EXTRACTOR_INPUT as u32);
        out.push(to_unit_tensor(&resized));
    }
    Ok(out)
}

/// Computes stats for both directories and their distance. Fewer than 100
/// images on either side flags a warning in the report.
pub fn fid_report(real_dir: &Path, fake_dir: &Path) -> Result<FidReport> {
    let extractor = ToyExtractor::bundled()?;
    let real = load_feature_images(real_dir)?;
    let fake = load_feature_images(fake_dir)?;
    let mut warnings = Vec::new();
    if real.len() < 100 {
        warnings.push(format!("only {} real images; FID is noisy below 100", real.len()));
    }
    if fake.len() < 100 {
        warnings.push(format!("only {} fake images; FID is noisy below 100", fake.len()));
    }
    let rf = extractor.extract_features(&real)?;
    let ff = extractor.extract_features(&fake)?;
    let rs = FeatureStats::from_features(&rf)?;
    let fs = FeatureStats::from_features(&ff)?;
    let fid = frechet_distance(&rs, &fs)?;
    Ok(FidReport {
        fid,
        n_real: real.len(),
        n_fake: fake.len(),
        extractor_id: extractor.id().to_string(),
        warnings,
    })
}
