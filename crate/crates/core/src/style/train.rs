//! Progressive WGAN-GP training for the style generator with adaptive
//! discriminator augmentation.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use albumgan_data::Dataset;
use albumgan_tensor::{loss, Adam, LossKind, Tensor, WganAux};

use crate::ada::{augment, augment_pair, rt_estimate, AdaController, AugmentPipeline};
use crate::error::{CoreError, Result};
use crate::grid;
use crate::network::{save_network, GanModel};
use crate::style::{ProgressiveSchedule, StyleDiscriminator, StyleGenerator};
use crate::train::{stack_samples, LossHistory, LossRecord, TrainConfig, TrainOutput};

fn wrap<E: Into<CoreError>>(iter: u64) -> impl FnOnce(E) -> CoreError {
    move |source| match source.into() {
        CoreError::Tensor(source) => CoreError::TrainingAborted { iter, source },
        other => other,
    }
}

/// Downscales a batch to the schedule's resolution by repeated 2x average
/// pooling (reals shown to the discriminator match the generator's current
/// output resolution).
fn downscale_to(batch: &Tensor, target_res: usize) -> Result<Tensor> {
    let mut x = batch.clone();
    while x.shape()[2] > target_res {
        x = x.avg_pool(2, 2)?;
    }
    if x.shape()[2] != target_res {
        return Err(CoreError::InvalidInput(format!(
            "cannot downscale {:?} to {target_res}",
            batch.shape()
        )));
    }
    Ok(x)
}

/// Per-sample interpolates between real and fake batches for the gradient
/// penalty probe, as a fresh leaf that can take input gradients.
fn interpolate_leaf<R: Rng>(real: &Tensor, fake: &Tensor, rng: &mut R) -> Result<Tensor> {
    let shape = real.shape().to_vec();
    let n = shape[0];
    let per = real.numel() / n;
    let rd = real.data();
    let fd = fake.data();
    let mut data = vec![0f32; real.numel()];
    for i in 0..n {
        let eps: f32 = rng.gen();
        for j in 0..per {
            data[i * per + j] = eps * rd[i * per + j] + (1.0 - eps) * fd[i * per + j];
        }
    }
    drop(rd);
    drop(fd);
    Ok(Tensor::from_vec(data, &shape)?.requires_grad())
}

fn per_sample_grad_norms(x_hat: &Tensor) -> Vec<f32> {
    let shape = x_hat.shape();
    let n = shape[0];
    let per = x_hat.numel() / n;
    let g = x_hat.grad().unwrap_or_else(|| vec![0.0; x_hat.numel()]);
    (0..n)
        .map(|i| {
            let s: f64 = g[i * per..(i + 1) * per]
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum();
            s.sqrt() as f32
        })
        .collect()
}

pub(crate) fn train_style(cfg: &TrainConfig, data: &Dataset, outdir: &Path) -> Result<TrainOutput> {
    let style_cfg = cfg.style_config();
    let full_res = style_cfg.resolution();
    if data.image_shape() != [3, full_res, full_res] {
        return Err(CoreError::InvalidConfig(format!(
            "dataset images are {:?}, style config expects [3,{full_res},{full_res}]",
            data.image_shape()
        )));
    }
    if cfg.loss != LossKind::WganGp {
        return Err(CoreError::InvalidConfig(
            "the style loop trains with the WGAN-GP loss".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let generator = StyleGenerator::new(&style_cfg, &mut rng)?;
    let discriminator = StyleDiscriminator::new(&style_cfg, &mut rng)?;
    let mut g_opt = Adam::new(generator.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut d_opt = Adam::new(discriminator.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut controller = cfg.ada.map(AdaController::new);
    let pipeline = AugmentPipeline::default();

    let iters_per_epoch = data.len() / cfg.batch_size;
    if iters_per_epoch == 0 {
        return Err(CoreError::InvalidConfig(format!(
            "dataset of {} images is smaller than one batch of {}",
            data.len(),
            cfg.batch_size
        )));
    }

    let grid_z = Tensor::randn(&[16, style_cfg.latent_dim], &mut rng);
    let mut history = LossHistory::new();
    let mut checkpoint_paths = Vec::new();
    let mut sample_grid_paths = Vec::new();
    let mut d_step_real_counts = Vec::new();
    let mut iter: u64 = 0;
    let mut images_shown: u64 = 0;

    let mut indices: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        for chunk in indices.chunks_exact(cfg.batch_size) {
            iter += 1;
            let schedule =
                ProgressiveSchedule::at_images(images_shown, style_cfg.levels, cfg.images_per_phase);
            let res = style_cfg.level_resolution(schedule.level);
            let p = controller.as_ref().map(|c| c.p()).unwrap_or(0.0);

            // --- critic step ---
            let reals: Vec<Tensor> = chunk.iter().map(|&i| data.get(i).clone()).collect();
            let real_batch = downscale_to(&stack_samples(&reals)?, res)?.detach();
            let z = Tensor::randn(&[cfg.batch_size, style_cfg.latent_dim], &mut rng);
            let fake_batch = generator
                .generate(&z, &schedule)
                .map_err(wrap(iter))?
                .detach();
            let (real_aug, fake_aug) =
                augment_pair(&real_batch, &fake_batch, &pipeline, p, &mut rng)?;
            let real_aug = real_aug.detach();
            let fake_aug = fake_aug.detach();

            // gradient-penalty probe: input gradient at interpolated points
            let x_hat = interpolate_leaf(&real_aug, &fake_aug, &mut rng)?;
            let probe = discriminator
                .forward(&x_hat, &schedule)
                .map_err(wrap(iter))?
                .sum_all()
                .map_err(wrap(iter))?;
            probe.backward().map_err(wrap(iter))?;
            let norms = per_sample_grad_norms(&x_hat);
            d_opt.zero_grad();

            let d_real = discriminator.forward(&real_aug, &schedule).map_err(wrap(iter))?;
            let d_fake = discriminator.forward(&fake_aug, &schedule).map_err(wrap(iter))?;
            let aux = WganAux {
                interp_grad_norms: norms,
                lambda: cfg.gp_lambda,
            };
            let d_loss = loss(LossKind::WganGp, &d_fake, &d_real, Some(&aux)).map_err(wrap(iter))?;
            d_loss.backward().map_err(wrap(iter))?;
            d_opt.step().map_err(wrap(iter))?;
            d_opt.zero_grad();
            g_opt.zero_grad();
            d_step_real_counts.push(cfg.batch_size);

            // overfitting estimate on the reals the critic actually saw
            let rt_batch = rt_estimate(&d_real.to_vec());
            if let Some(c) = controller.as_mut() {
                c.observe(rt_batch);
            }

            // --- generator step ---
            let z = Tensor::randn(&[cfg.batch_size, style_cfg.latent_dim], &mut rng);
            let fake = generator.generate(&z, &schedule).map_err(wrap(iter))?;
            let p_now = controller.as_ref().map(|c| c.p()).unwrap_or(0.0);
            let fake_aug = augment(&fake, &pipeline, p_now, &mut rng)?;
            let d_out = discriminator.forward(&fake_aug, &schedule).map_err(wrap(iter))?;
            let g_loss = albumgan_tensor::wgan_generator_loss(&d_out).map_err(wrap(iter))?;
            g_loss.backward().map_err(wrap(iter))?;
            g_opt.step().map_err(wrap(iter))?;
            g_opt.zero_grad();
            d_opt.zero_grad();

            images_shown += cfg.batch_size as u64;
            history.push(LossRecord {
                iter,
                g_loss: g_loss.item(),
                d_loss: d_loss.item(),
                p: Some(controller.as_ref().map(|c| c.p()).unwrap_or(0.0)),
                rt: Some(controller.as_ref().map(|c| c.rt()).unwrap_or(rt_batch)),
                kimg: Some(images_shown as f64 / 1000.0),
            })?;
        }

        let ckpt_path = outdir.join(format!("network-epoch{:04}.agck", epoch + 1));
        save_network(
            &ckpt_path,
            &GanModel::Style {
                g: &generator,
                d: &discriminator,
            },
        )?;
        checkpoint_paths.push(ckpt_path);

        if (epoch + 1) % cfg.sample_every_epochs.max(1) == 0 {
            let schedule =
                ProgressiveSchedule::at_images(images_shown, style_cfg.levels, cfg.images_per_phase);
            let samples = generator.generate(&grid_z, &schedule)?;
            let path = outdir.join(format!("samples-epoch{:04}.png", epoch + 1));
            grid::save_sample_grid(&samples, cfg.normalize_mode, data.stats(), &path)?;
            sample_grid_paths.push(path);
        }
    }

    history.write_csv(&outdir.join("loss.csv"))?;
    Ok(TrainOutput {
        history,
        checkpoint_paths,
        sample_grid_paths,
        d_step_real_counts,
    })
}
