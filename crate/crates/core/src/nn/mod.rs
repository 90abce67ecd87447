//! Layer constructors, weight initialization schemes, and the checkpoint
//! container format.

mod checkpoint;
mod init;
mod layers;
mod sequential;

pub use checkpoint::{Checkpoint, Entry, MAGIC, VERSION};
pub use init::{
    init_default_dcgan, init_default_dcgan_batchnorm, init_default_dcgan_conv, init_he,
    init_weights, init_xavier_normalized, InitScheme, InitSpec, LayerKind,
};
pub use layers::{BatchNorm, Conv2d, ConvTranspose2d, Dense, Dropout, Mode};
pub use sequential::{Layer, LayerSpec, Sequential};

pub(crate) use sequential::{put, take};
