//! Single-file network snapshots: model weights plus numeric `arch/*`
//! records describing the topology, so one path fully identifies a
//! loadable generator/discriminator pair.

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::models::{dcgan_discriminator, dcgan_generator, intro_discriminator, intro_generator, DcganInit};
use crate::nn::{Checkpoint, Sequential};
use crate::style::{StyleConfig, StyleDiscriminator, StyleGenerator};

const KIND_INTRO: f32 = 0.0;
const KIND_DCGAN: f32 = 1.0;
const KIND_STYLE: f32 = 2.0;

/// Borrowed view of a trained model for snapshotting.
pub enum GanModel<'a> {
    Intro {
        g: &'a Sequential,
        d: &'a Sequential,
        latent: usize,
        image: (usize, usize, usize),
        leaky: f32,
        dropout: f32,
    },
    Dcgan {
        g: &'a Sequential,
        d: &'a Sequential,
        latent: usize,
        image: (usize, usize, usize),
        ngf: usize,
        ndf: usize,
        init: DcganInit,
        leaky: f32,
    },
    Style {
        g: &'a StyleGenerator,
        d: &'a StyleDiscriminator,
    },
}

/// Owned model reconstructed from a snapshot.
pub enum LoadedModel {
    Intro {
        g: Sequential,
        d: Sequential,
        latent: usize,
        image: (usize, usize, usize),
    },
    Dcgan {
        g: Sequential,
        d: Sequential,
        latent: usize,
        image: (usize, usize, usize),
    },
    Style {
        g: StyleGenerator,
        d: StyleDiscriminator,
    },
}

pub fn save_network(path: &Path, model: &GanModel) -> Result<()> {
    let mut ckpt = Checkpoint::new();
    match model {
        GanModel::Intro {
            g,
            d,
            latent,
            image,
            leaky,
            dropout,
        } => {
            ckpt.insert_scalar("arch/kind", KIND_INTRO);
            ckpt.insert_scalar("arch/latent", *latent as f32);
            ckpt.insert(
                "arch/image",
                vec![3],
                vec![image.0 as f32, image.1 as f32, image.2 as f32],
            );
            ckpt.insert_scalar("arch/leaky", *leaky);
            ckpt.insert_scalar("arch/dropout", *dropout);
            g.write_state(&mut ckpt, "g");
            d.write_state(&mut ckpt, "d");
        }
        GanModel::Dcgan {
            g,
            d,
            latent,
            image,
            ngf,
            ndf,
            init,
            leaky,
        } => {
            ckpt.insert_scalar("arch/kind", KIND_DCGAN);
            ckpt.insert_scalar("arch/latent", *latent as f32);
            ckpt.insert(
                "arch/image",
                vec![3],
                vec![image.0 as f32, image.1 as f32, image.2 as f32],
            );
            ckpt.insert_scalar("arch/ngf", *ngf as f32);
            ckpt.insert_scalar("arch/ndf", *ndf as f32);
            ckpt.insert_scalar(
                "arch/init",
                match init {
                    DcganInit::Default => 0.0,
                    DcganInit::Custom => 1.0,
                },
            );
            ckpt.insert_scalar("arch/leaky", *leaky);
            g.write_state(&mut ckpt, "g");
            d.write_state(&mut ckpt, "d");
        }
        GanModel::Style { g, d } => {
            let cfg = &g.cfg;
            ckpt.insert_scalar("arch/kind", KIND_STYLE);
            ckpt.insert_scalar("arch/latent", cfg.latent_dim as f32);
            ckpt.insert_scalar("arch/levels", cfg.levels as f32);
            ckpt.insert(
                "arch/channels",
                vec![cfg.channels.len()],
                cfg.channels.iter().map(|&c| c as f32).collect(),
            );
            ckpt.insert_scalar("arch/mapping_layers", cfg.mapping_layers as f32);
            ckpt.insert_scalar("arch/leaky", cfg.leaky);
            g.write_state(&mut ckpt, "g");
            d.write_state(&mut ckpt, "d");
        }
    }
    ckpt.save(path)
}

pub fn load_network(path: &Path) -> Result<LoadedModel> {
    let ckpt = Checkpoint::load(path)?;
    let kind = ckpt.scalar("arch/kind")?;
    // weight draws are overwritten by read_state; the seed is irrelevant
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    if kind == KIND_INTRO {
        let latent = ckpt.scalar("arch/latent")? as usize;
        let img = ckpt.require("arch/image")?;
        let image = (
            img.data[0] as usize,
            img.data[1] as usize,
            img.data[2] as usize,
        );
        let leaky = ckpt.scalar("arch/leaky")?;
        let dropout = ckpt.scalar("arch/dropout")?;
        let g = intro_generator(latent, image, leaky, &mut rng)?;
        let d = intro_discriminator(image, leaky, dropout, &mut rng)?;
        g.read_state(&ckpt, "g")?;
        d.read_state(&ckpt, "d")?;
        Ok(LoadedModel::Intro {
            g,
            d,
            latent,
            image,
        })
    } else if kind == KIND_DCGAN {
        let latent = ckpt.scalar("arch/latent")? as usize;
        let img = ckpt.require("arch/image")?;
        let image = (
            img.data[0] as usize,
            img.data[1] as usize,
            img.data[2] as usize,
        );
        let ngf = ckpt.scalar("arch/ngf")? as usize;
        let ndf = ckpt.scalar("arch/ndf")? as usize;
        let init = if ckpt.scalar("arch/init")? == 0.0 {
            DcganInit::Default
        } else {
            DcganInit::Custom
        };
        let leaky = ckpt.scalar("arch/leaky")?;
        let g = dcgan_generator(latent, ngf, image.0, init, &mut rng)?;
        let d = dcgan_discriminator(image.0, ndf, leaky, init, &mut rng)?;
        g.read_state(&ckpt, "g")?;
        d.read_state(&ckpt, "d")?;
        Ok(LoadedModel::Dcgan {
            g,
            d,
            latent,
            image,
        })
    } else if kind == KIND_STYLE {
        let channels_entry = ckpt.require("arch/channels")?;
        let cfg = StyleConfig {
            latent_dim: ckpt.scalar("arch/latent")? as usize,
            levels: ckpt.scalar("arch/levels")? as usize,
            channels: channels_entry.data.iter().map(|&c| c as usize).collect(),
            mapping_layers: ckpt.scalar("arch/mapping_layers")? as usize,
            leaky: ckpt.scalar("arch/leaky")?,
        };
        let g = StyleGenerator::new(&cfg, &mut rng)?;
        let d = StyleDiscriminator::new(&cfg, &mut rng)?;
        g.read_state(&ckpt, "g")?;
        d.read_state(&ckpt, "d")?;
        Ok(LoadedModel::Style { g, d })
    } else {
        Err(CoreError::Checkpoint(format!(
            "unknown network kind {kind}"
        )))
    }
}

/// Loads a snapshot and requires it to be a style network (projection,
/// mixing and interpolation need the style generator).
pub fn load_style_network(path: &Path) -> Result<(StyleGenerator, StyleDiscriminator)> {
    match load_network(path)? {
        LoadedModel::Style { g, d } => Ok((g, d)),
        _ => Err(CoreError::InvalidInput(format!(
            "{} is not a style network",
            path.display()
        ))),
    }
}
