//! Loss functions. Cross-entropy predictions are clamped to
//! [1e-7, 1-1e-7] before the log so saturated sigmoids cannot produce
//! infinities; values accumulate in f64.

use crate::error::{Result, TensorError};
use crate::op::Op;
use crate::tensor::Tensor;

pub(crate) const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Mse,
    Bce,
    Cce,
    WganGp,
}

/// Auxiliary inputs for the WGAN-GP penalty term: per-sample L2 norms of the
/// critic's gradient at interpolated points, computed by a separate backward
/// pass, plus the penalty weight.
#[derive(Debug, Clone)]
pub struct WganAux {
    pub interp_grad_norms: Vec<f32>,
    pub lambda: f32,
}

impl WganAux {
    pub fn new(interp_grad_norms: Vec<f32>) -> WganAux {
        WganAux {
            interp_grad_norms,
            lambda: 10.0,
        }
    }
}

/// Dispatch by kind. For `WganGp`, `pred` holds critic outputs on fakes and
/// `target` critic outputs on reals.
pub fn loss(kind: LossKind, pred: &Tensor, target: &Tensor, aux: Option<&WganAux>) -> Result<Tensor> {
    match kind {
        LossKind::Mse => mse(pred, target),
        LossKind::Bce => bce(pred, target),
        LossKind::Cce => cce(pred, target),
        LossKind::WganGp => {
            let penalty = aux.map(|a| a.lambda * gradient_penalty(&a.interp_grad_norms)).unwrap_or(0.0);
            wgan_critic_loss(pred, target, penalty)
        }
    }
}

fn check_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean squared error over all elements.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    check_same_shape("mse", pred, target)?;
    let p = pred.data();
    let t = target.data();
    let n = p.len().max(1) as f64;
    let s: f64 = p
        .iter()
        .zip(t.iter())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    drop(p);
    drop(t);
    Tensor::from_op(
        vec![(s / n) as f32],
        vec![],
        Op::Mse {
            pred: pred.clone(),
            target: target.clone(),
        },
    )
}

/// Binary cross entropy, mean over all elements. Targets must lie in [0,1].
pub fn bce(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    check_same_shape("bce", pred, target)?;
    {
        let t = target.data();
        if !t.iter().all(|&y| (0.0..=1.0).contains(&y)) {
            return Err(TensorError::InvalidArgument {
                op: "bce",
                msg: "targets must lie in [0,1]".into(),
            });
        }
    }
    let p = pred.data();
    let t = target.data();
    let n = p.len().max(1) as f64;
    let s: f64 = p
        .iter()
        .zip(t.iter())
        .map(|(&a, &y)| {
            let pc = (a as f64).clamp(PROB_EPS, 1.0 - PROB_EPS);
            let y = y as f64;
            -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
        })
        .sum();
    drop(p);
    drop(t);
    Tensor::from_op(
        vec![(s / n) as f32],
        vec![],
        Op::Bce {
            pred: pred.clone(),
            target: target.clone(),
        },
    )
}

/// Categorical cross entropy: per-row -sum(y*ln p) over the class axis,
/// averaged over rows. A 1-D input is treated as a single observation.
pub fn cce(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    check_same_shape("cce", pred, target)?;
    {
        let t = target.data();
        if !t.iter().all(|&y| (0.0..=1.0).contains(&y)) {
            return Err(TensorError::InvalidArgument {
                op: "cce",
                msg: "targets must lie in [0,1]".into(),
            });
        }
    }
    let rows = if pred.shape().len() >= 2 { pred.shape()[0] } else { 1 };
    let p = pred.data();
    let t = target.data();
    let s: f64 = p
        .iter()
        .zip(t.iter())
        .map(|(&a, &y)| {
            let pc = (a as f64).clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(y as f64) * pc.ln()
        })
        .sum();
    drop(p);
    drop(t);
    Tensor::from_op(
        vec![(s / rows.max(1) as f64) as f32],
        vec![],
        Op::Cce {
            pred: pred.clone(),
            target: target.clone(),
        },
    )
}

/// WGAN-GP penalty value: mean of (||grad|| - 1)^2 over samples.
pub fn gradient_penalty(interp_grad_norms: &[f32]) -> f32 {
    if interp_grad_norms.is_empty() {
        return 0.0;
    }
    let s: f64 = interp_grad_norms
        .iter()
        .map(|&g| {
            let d = g as f64 - 1.0;
            d * d
        })
        .sum();
    (s / interp_grad_norms.len() as f64) as f32
}

/// Critic loss mean(D(fake)) - mean(D(real)) + penalty. The penalty enters
/// as a constant: this engine is first-order and cannot differentiate
/// through its own backward pass, so the critic update uses the Wasserstein
/// term's gradient.
pub fn wgan_critic_loss(d_fake: &Tensor, d_real: &Tensor, penalty: f32) -> Result<Tensor> {
    d_fake
        .mean_all()?
        .sub(&d_real.mean_all()?)?
        .add_scalar(penalty)
}

/// Generator loss -mean(D(fake)).
pub fn wgan_generator_loss(d_fake: &Tensor) -> Result<Tensor> {
    d_fake.mean_all()?.neg()
}
