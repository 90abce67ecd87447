//! GAN toolkit core: layers and initializers, the intro/DCGAN/style
//! architectures and their training loops, adaptive discriminator
//! augmentation, latent-space operations and toy Frechet-distance
//! evaluation.

pub mod ada;
mod error;
pub mod grid;
pub mod latent;
pub mod metrics;
pub mod models;
pub mod network;
pub mod nn;
pub mod style;
pub mod train;

pub use error::{CoreError, Result};
