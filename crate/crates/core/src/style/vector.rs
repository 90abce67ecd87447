//! The projected/mapped latent representation w: one row per style slot.
//! Stored on disk as a checkpoint container holding the single named array
//! "w" of shape (num_styles, latent_dim).

use std::path::Path;

use albumgan_tensor::Tensor;

use crate::error::{CoreError, Result};
use crate::nn::Checkpoint;

#[derive(Debug, Clone, PartialEq)]
pub struct StyleVector {
    pub num_styles: usize,
    pub latent_dim: usize,
    /// Row-major (num_styles, latent_dim).
    pub w: Vec<f32>,
}

impl StyleVector {
    pub fn new(num_styles: usize, latent_dim: usize, w: Vec<f32>) -> Result<StyleVector> {
        if num_styles * latent_dim != w.len() {
            return Err(CoreError::InvalidInput(format!(
                "style vector of shape ({num_styles},{latent_dim}) needs {} values, got {}",
                num_styles * latent_dim,
                w.len()
            )));
        }
        Ok(StyleVector {
            num_styles,
            latent_dim,
            w,
        })
    }

    /// All rows set to `row` (the broadcast layout map_latent produces).
    pub fn broadcast(num_styles: usize, row: &[f32]) -> StyleVector {
        let mut w = Vec::with_capacity(num_styles * row.len());
        for _ in 0..num_styles {
            w.extend_from_slice(row);
        }
        StyleVector {
            num_styles,
            latent_dim: row.len(),
            w,
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.w[i * self.latent_dim..(i + 1) * self.latent_dim]
    }

    /// [1, num_styles, latent_dim] tensor for synthesis.
    pub fn to_tensor(&self) -> Result<Tensor> {
        Ok(Tensor::from_vec(
            self.w.clone(),
            &[1, self.num_styles, self.latent_dim],
        )?)
    }

    pub fn from_tensor(t: &Tensor) -> Result<StyleVector> {
        let shape = t.shape();
        let (s, l) = match shape {
            [1, s, l] => (*s, *l),
            [s, l] => (*s, *l),
            other => {
                return Err(CoreError::InvalidInput(format!(
                    "expected (num_styles, latent_dim) tensor, got {other:?}"
                )))
            }
        };
        StyleVector::new(s, l, t.to_vec())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ckpt = Checkpoint::new();
        ckpt.insert("w", vec![self.num_styles, self.latent_dim], self.w.clone());
        ckpt.save(path)
    }

    pub fn load(path: &Path) -> Result<StyleVector> {
        let ckpt = Checkpoint::load(path)?;
        let e = ckpt.require("w")?;
        if e.shape.len() != 2 {
            return Err(CoreError::Checkpoint(format!(
                "'w' must be 2-d, got {:?}",
                e.shape
            )));
        }
        StyleVector::new(e.shape[0], e.shape[1], e.data.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("projected_w.agck");
        let v = StyleVector::new(14, 512, (0..14 * 512).map(|i| i as f32 * 0.001).collect()).unwrap();
        v.save(&p).unwrap();
        let back = StyleVector::load(&p).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn broadcast_rows_are_identical() {
        let v = StyleVector::broadcast(4, &[1.0, 2.0, 3.0]);
        for i in 1..4 {
            assert_eq!(v.row(i), v.row(0));
        }
    }
}
