//! Post-training latent operations: projection of target images into
//! w-space, averaging, linear interpolation and k-style mixing.

use rand::Rng;
use serde::Serialize;

use albumgan_tensor::{mse, Adam, Tensor};

use crate::error::{CoreError, Result};
use crate::style::{ProgressiveSchedule, StyleGenerator, StyleVector};

fn check_same_shape(a: &StyleVector, b: &StyleVector) -> Result<()> {
    if a.num_styles != b.num_styles || a.latent_dim != b.latent_dim {
        return Err(CoreError::InvalidInput(format!(
            "style vectors differ in shape: ({},{}) vs ({},{})",
            a.num_styles, a.latent_dim, b.num_styles, b.latent_dim
        )));
    }
    Ok(())
}

/// Elementwise lam*b + (1-lam)*a.
pub fn interpolate(a: &StyleVector, b: &StyleVector, lam: f32) -> Result<StyleVector> {
    check_same_shape(a, b)?;
    if !(0.0..=1.0).contains(&lam) {
        return Err(CoreError::InvalidInput(format!(
            "interpolation weight must be in [0,1], got {lam}"
        )));
    }
    // endpoint branches and the fused form keep the identities exact:
    // lam=0 -> a, lam=1 -> b, interpolate(w,w,lam) = w
    if lam == 0.0 {
        return Ok(a.clone());
    }
    if lam == 1.0 {
        return Ok(b.clone());
    }
    let w = a
        .w
        .iter()
        .zip(&b.w)
        .map(|(&x, &y)| x + lam * (y - x))
        .collect();
    StyleVector::new(a.num_styles, a.latent_dim, w)
}

/// Elementwise mean over >= 1 equally shaped vectors (f64 accumulation).
pub fn average(vectors: &[StyleVector]) -> Result<StyleVector> {
    let first = vectors
        .first()
        .ok_or_else(|| CoreError::InvalidInput("average needs at least one vector".into()))?;
    let mut acc = vec![0f64; first.w.len()];
    for v in vectors {
        check_same_shape(first, v)?;
        for (a, &x) in acc.iter_mut().zip(&v.w) {
            *a += x as f64;
        }
    }
    let n = vectors.len() as f64;
    StyleVector::new(
        first.num_styles,
        first.latent_dim,
        acc.into_iter().map(|v| (v / n) as f32).collect(),
    )
}

/// Rows [0,k) from `b`, rows [k, num_styles) from `a` — coarse styles of
/// one source combined with the fine styles of the other.
pub fn style_mix(a: &StyleVector, b: &StyleVector, k: usize) -> Result<StyleVector> {
    check_same_shape(a, b)?;
    if k > a.num_styles {
        return Err(CoreError::InvalidInput(format!(
            "k = {k} exceeds num_styles = {}",
            a.num_styles
        )));
    }
    let l = a.latent_dim;
    let mut w = a.w.clone();
    w[..k * l].copy_from_slice(&b.w[..k * l]);
    StyleVector::new(a.num_styles, a.latent_dim, w)
}

/// `divisions` rendered frames at lam = i/divisions, i = 0..divisions
/// (first frame is a's render; lam = 1 is excluded, matching the source
/// sweep from 0.0 in 1/divisions steps).
pub fn interpolation_sequence(
    g: &StyleGenerator,
    schedule: &ProgressiveSchedule,
    a: &StyleVector,
    b: &StyleVector,
    divisions: usize,
) -> Result<Vec<Tensor>> {
    if divisions == 0 {
        return Err(CoreError::InvalidInput("divisions must be >= 1".into()));
    }
    let mut frames = Vec::with_capacity(divisions);
    for i in 0..divisions {
        let lam = i as f32 / divisions as f32;
        let w = interpolate(a, b, lam)?;
        frames.push(g.synthesis.forward(&w.to_tensor()?, schedule)?);
    }
    Ok(frames)
}

/// Result of one projection run: the optimized vector, the per-step loss
/// trace (length == steps), and the settings that produced it.
#[derive(Debug, Clone)]
pub struct ProjectionRun {
    pub w: StyleVector,
    pub trace: Vec<f32>,
    pub steps: usize,
    pub lr: f32,
}

pub const PROJECT_DEFAULT_STEPS: usize = 600;
pub const PROJECT_DEFAULT_LR: f32 = 0.1;

/// Gradient-descent inversion of the generator: optimizes all style rows
/// jointly by Adam on pixel-space MSE, starting from the mapper's mean w
/// over 1k samples, with a cosine learning-rate ramp-down.
pub fn project<R: Rng>(
    g: &StyleGenerator,
    schedule: &ProgressiveSchedule,
    target: &Tensor,
    steps: usize,
    lr: f32,
    rng: &mut R,
) -> Result<ProjectionRun> {
    project_from(g, schedule, target, steps, lr, None, rng)
}

/// Like `project` but with an explicit starting vector (fixed-point checks,
/// warm restarts).
pub fn project_from<R: Rng>(
    g: &StyleGenerator,
    schedule: &ProgressiveSchedule,
    target: &Tensor,
    steps: usize,
    lr: f32,
    init: Option<&StyleVector>,
    rng: &mut R,
) -> Result<ProjectionRun> {
    let res = g.cfg.level_resolution(schedule.level.min(g.cfg.levels - 1));
    if target.shape() != [1, 3, res, res] {
        return Err(CoreError::InvalidInput(format!(
            "target shape {:?} does not match generator output [1,3,{res},{res}]",
            target.shape()
        )));
    }
    if steps == 0 {
        return Err(CoreError::InvalidInput("steps must be >= 1".into()));
    }
    let (s, l) = (g.cfg.num_styles(), g.cfg.latent_dim);
    let start = match init {
        Some(v) => {
            if v.num_styles != s || v.latent_dim != l {
                return Err(CoreError::InvalidInput(
                    "init vector shape does not match the generator".into(),
                ));
            }
            v.clone()
        }
        None => StyleVector::broadcast(s, &g.mean_w(1000, rng)?),
    };
    let w = Tensor::from_vec(start.w, &[1, s, l])?.requires_grad();
    let mut opt = Adam::new(vec![w.clone()], lr, 0.9, 0.999, 1e-8);
    let mut trace = Vec::with_capacity(steps);
    for t in 0..steps {
        let img = g.synthesis.forward(&w, schedule)?;
        let loss = mse(&img, target)?;
        trace.push(loss.item());
        loss.backward()?;
        let ramp = 0.5 * (1.0 + (std::f32::consts::PI * t as f32 / steps as f32).cos());
        opt.set_lr(lr * ramp);
        opt.step()?;
        opt.zero_grad();
    }
    Ok(ProjectionRun {
        w: StyleVector::new(s, l, w.to_vec())?,
        trace,
        steps,
        lr,
    })
}

/// grid[i][j] = render(style_mix(w_i, w_j, k)); the diagonal renders the
/// unmixed sources.
pub fn mixing_grid(
    g: &StyleGenerator,
    schedule: &ProgressiveSchedule,
    sources: &[StyleVector],
    k: usize,
) -> Result<Vec<Vec<Tensor>>> {
    if sources.is_empty() {
        return Err(CoreError::InvalidInput("mixing grid needs sources".into()));
    }
    let mut rows = Vec::with_capacity(sources.len());
    for wi in sources {
        let mut row = Vec::with_capacity(sources.len());
        for wj in sources {
            let mixed = style_mix(wi, wj, k)?;
            row.push(g.synthesis.forward(&mixed.to_tensor()?, schedule)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// JSON sidecar identifying grid rows/columns by their source labels.
#[derive(Debug, Serialize)]
pub struct GridSidecar {
    pub k: usize,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
}
