//! Minimal reverse-mode autodiff engine backing the GAN toolkit.
//!
//! Dense f32 tensors, the neural-network primitives the models need
//! (activations, losses, convolutions, pooling), gradient computation over a
//! recorded tape, and the Adam optimizer. Single-threaded by design: tensor
//! values are immutable once written by an op, so read-only sharing is safe,
//! and determinism is part of the contract (same seed, same ops, identical
//! bits).

mod adam;
mod backward;
mod error;
mod loss;
mod nn;
mod op;
mod ops;
mod shape;
mod tensor;

pub use adam::{adam_step, Adam, AdamState};
pub use backward::{backward, Tape};
pub use error::{Result, TensorError};
pub use loss::{
    bce, cce, gradient_penalty, loss, mse, wgan_critic_loss, wgan_generator_loss, LossKind,
    WganAux,
};
pub use nn::{activation, Activation};
pub use tensor::Tensor;
