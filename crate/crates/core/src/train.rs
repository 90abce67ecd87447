//! Training loops for the introductory GAN and DCGAN with the
//! stabilization techniques as switchable options, plus loss-history
//! recording and the divergence / mode-collapse heuristics.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use albumgan_data::{Dataset, NormalizeMode};
use albumgan_tensor::{bce, Adam, LossKind, Tensor};

use crate::ada::AdaConfig;
use crate::error::{CoreError, Result};
use crate::grid;
use crate::models::{dcgan_discriminator, dcgan_generator, intro_discriminator, intro_generator, DcganInit};
use crate::network::{save_network, GanModel};
use crate::nn::Mode;
use crate::style::StyleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Intro,
    Dcgan,
    Style,
}

impl std::str::FromStr for ModelKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<ModelKind> {
        match s {
            "intro" => Ok(ModelKind::Intro),
            "dcgan" => Ok(ModelKind::Dcgan),
            "style" => Ok(ModelKind::Style),
            other => Err(CoreError::InvalidConfig(format!(
                "unknown model '{other}' (expected intro, dcgan or style)"
            ))),
        }
    }
}

/// One training run's knobs; the defaults mirror the hyperparameter tables
/// the three source models were trained with.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub batch_size: usize,
    /// (channels, height, width)
    pub image: (usize, usize, usize),
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub latent_dim: usize,
    pub epochs: usize,
    pub leaky_slope: f32,
    pub init: DcganInit,
    pub normalize_mode: NormalizeMode,
    /// One-sided smoothing range for real labels.
    pub label_smoothing: Option<(f32, f32)>,
    /// Fraction of each half-batch swapped between real and fake.
    pub noisy_label_ratio: Option<f32>,
    pub dropout: f32,
    pub loss: LossKind,
    pub seed: u64,
    /// Feature-map width scales (64 in the source DCGAN).
    pub ngf: usize,
    pub ndf: usize,
    /// Sample-grid cadence in epochs.
    pub sample_every_epochs: usize,
    // style-model extras
    pub levels: usize,
    pub base_channels: usize,
    pub images_per_phase: u64,
    pub ada: Option<AdaConfig>,
    pub gp_lambda: f32,
}

impl TrainConfig {
    /// Introductory model table: batch 256, 28x28x1, lr 2e-4, beta 0.5,
    /// latent 100, 100 epochs, leaky 0.2, glorot-uniform init, no pixel
    /// scaling, dropout 0.4 on the discriminator, BCE loss.
    pub fn intro_defaults() -> TrainConfig {
        TrainConfig {
            model: ModelKind::Intro,
            batch_size: 256,
            image: (1, 28, 28),
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            latent_dim: 100,
            epochs: 100,
            leaky_slope: 0.2,
            init: DcganInit::Default,
            normalize_mode: NormalizeMode::Unit,
            label_smoothing: None,
            noisy_label_ratio: None,
            dropout: 0.4,
            loss: LossKind::Bce,
            seed: 0,
            ngf: 64,
            ndf: 64,
            sample_every_epochs: 10,
            levels: 4,
            base_channels: 64,
            images_per_phase: 10_000,
            ada: None,
            gp_lambda: 10.0,
        }
    }

    /// DCGAN table: batch 128, 64x64x3, lr 2e-4, beta 0.5, latent 100,
    /// 12 epochs, leaky 0.2, batch norm, pixel scaling, BCE loss.
    pub fn dcgan_defaults() -> TrainConfig {
        TrainConfig {
            model: ModelKind::Dcgan,
            batch_size: 128,
            image: (3, 64, 64),
            epochs: 12,
            dropout: 0.0,
            normalize_mode: NormalizeMode::HardcodedHalf,
            ..TrainConfig::intro_defaults()
        }
    }

    /// StyleGAN2 table: batch 16, Adam beta1 0, beta2 0.99, eps 1e-8,
    /// latent 512, leaky 0.2, ADA target 0.6, WGAN-GP loss, progressive
    /// growing; resolution desk-scaled to 32x32.
    pub fn style_defaults() -> TrainConfig {
        TrainConfig {
            model: ModelKind::Style,
            batch_size: 16,
            image: (3, 32, 32),
            lr: 2e-3,
            beta1: 0.0,
            beta2: 0.99,
            latent_dim: 512,
            epochs: 10,
            normalize_mode: NormalizeMode::HardcodedHalf,
            dropout: 0.0,
            loss: LossKind::WganGp,
            levels: 4,
            base_channels: 64,
            images_per_phase: 2_000,
            ada: Some(AdaConfig::default()),
            ..TrainConfig::intro_defaults()
        }
    }

    pub fn style_config(&self) -> StyleConfig {
        let mut cfg = StyleConfig::with_levels(self.levels, self.latent_dim, self.base_channels);
        cfg.leaky = self.leaky_slope;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(CoreError::InvalidConfig(
                "batch_size must be an even number >= 2".into(),
            ));
        }
        if self.latent_dim < 1 {
            return Err(CoreError::InvalidConfig("latent_dim must be >= 1".into()));
        }
        if self.lr <= 0.0 {
            return Err(CoreError::InvalidConfig("lr must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CoreError::InvalidConfig("dropout must be in [0,1)".into()));
        }
        if let Some((lo, hi)) = self.label_smoothing {
            if lo > hi {
                return Err(CoreError::InvalidConfig(
                    "label smoothing needs lo <= hi".into(),
                ));
            }
        }
        if let Some(r) = self.noisy_label_ratio {
            if !(0.0..=1.0).contains(&r) {
                return Err(CoreError::InvalidConfig(
                    "noisy_label_ratio must be in [0,1]".into(),
                ));
            }
        }
        if self.model == ModelKind::Dcgan && (self.image.1 != 64 || self.image.2 != 64) {
            return Err(CoreError::InvalidConfig(
                "the DCGAN architecture is fixed at 64x64".into(),
            ));
        }
        if self.model == ModelKind::Style {
            let expect = 4 << (self.levels - 1);
            if self.image.1 != expect || self.image.2 != expect {
                return Err(CoreError::InvalidConfig(format!(
                    "style model with {} levels expects {expect}x{expect} images",
                    self.levels
                )));
            }
        }
        Ok(())
    }
}

/// One history row. `p`, `rt` and `kimg` are populated by style/ADA runs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub iter: u64,
    pub g_loss: f32,
    pub d_loss: f32,
    pub p: Option<f32>,
    pub rt: Option<f32>,
    pub kimg: Option<f64>,
}

/// Per-iteration (iter, g_loss, d_loss) triples with strictly increasing
/// iteration numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    records: Vec<LossRecord>,
}

impl LossHistory {
    pub fn new() -> LossHistory {
        LossHistory::default()
    }

    pub fn push(&mut self, record: LossRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.iter <= last.iter {
                return Err(CoreError::InvalidInput(format!(
                    "loss history iterations must strictly increase ({} after {})",
                    record.iter, last.iter
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[LossRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv_string(&self) -> String {
        let ada = self.records.iter().any(|r| r.p.is_some());
        let mut out = String::new();
        if ada {
            out.push_str("iter,g_loss,d_loss,p,rt,kimg\n");
        } else {
            out.push_str("iter,g_loss,d_loss\n");
        }
        for r in &self.records {
            if ada {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.iter,
                    r.g_loss,
                    r.d_loss,
                    r.p.unwrap_or(0.0),
                    r.rt.unwrap_or(0.0),
                    r.kimg.unwrap_or(0.0)
                ));
            } else {
                out.push_str(&format!("{},{},{}\n", r.iter, r.g_loss, r.d_loss));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Draws each real label uniformly from [lo, hi] (one-sided smoothing: the
/// caller leaves fake labels untouched).
pub fn smooth_labels<R: Rng>(labels: &mut [f32], lo: f32, hi: f32, rng: &mut R) {
    for v in labels.iter_mut() {
        *v = if lo == hi { lo } else { rng.gen_range(lo..hi) };
    }
}

/// Swaps floor(ratio * n) items between the real and fake batches, where n
/// is the per-batch item count. Returns the swap pairs; replaying them
/// restores the originals (each index takes part in at most one swap).
pub fn noisy_labels<T, R: Rng>(
    reals: &mut [T],
    fakes: &mut [T],
    ratio: f32,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let n = reals.len().min(fakes.len());
    let k = ((ratio as f64) * n as f64).floor() as usize;
    if k == 0 {
        return Vec::new();
    }
    let mut ri: Vec<usize> = (0..reals.len()).collect();
    let mut fi: Vec<usize> = (0..fakes.len()).collect();
    ri.shuffle(rng);
    fi.shuffle(rng);
    let mut swaps = Vec::with_capacity(k);
    for (&i, &j) in ri.iter().zip(fi.iter()).take(k) {
        std::mem::swap(&mut reals[i], &mut fakes[j]);
        swaps.push((i, j));
    }
    swaps
}

/// First iteration where the trailing-window mean of g_loss exceeds its
/// running minimum by `factor`; None while training looks stable.
pub fn detect_divergence(history: &LossHistory, window: usize, factor: f32) -> Option<u64> {
    let records = history.records();
    let window = window.max(1);
    if records.len() < window {
        return None;
    }
    let mut running_min = f64::INFINITY;
    let mut sum: f64 = records[..window].iter().map(|r| r.g_loss as f64).sum();
    for t in window..=records.len() {
        let mean = sum / window as f64;
        if mean < running_min {
            running_min = mean;
        } else if mean > factor as f64 * running_min {
            return Some(records[t - 1].iter);
        }
        if t < records.len() {
            sum += records[t].g_loss as f64;
            sum -= records[t - window].g_loss as f64;
        }
    }
    None
}

/// Mean pairwise cosine similarity of flattened samples, clamped to [0,1].
/// Identical samples score 1.0; independent zero-centred noise scores near 0.
pub fn detect_mode_collapse(samples: &[Tensor]) -> f32 {
    if samples.len() < 2 {
        return 0.0;
    }
    let flat: Vec<Vec<f32>> = samples.iter().map(|t| t.to_vec()).collect();
    let norms: Vec<f64> = flat
        .iter()
        .map(|v| v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt())
        .collect();
    let mut total = 0f64;
    let mut pairs = 0usize;
    for i in 0..flat.len() {
        for j in i + 1..flat.len() {
            let dot: f64 = flat[i]
                .iter()
                .zip(&flat[j])
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            let denom = (norms[i] * norms[j]).max(1e-12);
            total += dot / denom;
            pairs += 1;
        }
    }
    ((total / pairs as f64) as f32).clamp(0.0, 1.0)
}

/// Everything a run leaves behind.
pub struct TrainOutput {
    pub history: LossHistory,
    pub checkpoint_paths: Vec<PathBuf>,
    pub sample_grid_paths: Vec<PathBuf>,
    /// Reals per discriminator update, for the half/half contract.
    pub d_step_real_counts: Vec<usize>,
}

/// Stacks per-sample [C,H,W] tensors into a constant [N,C,H,W] batch.
pub fn stack_samples(samples: &[Tensor]) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(CoreError::InvalidInput("cannot stack an empty batch".into()));
    }
    let shape = samples[0].shape().to_vec();
    let mut data = Vec::with_capacity(samples.len() * samples[0].numel());
    for s in samples {
        if s.shape() != shape {
            return Err(CoreError::InvalidInput(
                "stacked samples must share one shape".into(),
            ));
        }
        data.extend_from_slice(&s.data());
    }
    let mut out_shape = vec![samples.len()];
    out_shape.extend_from_slice(&shape);
    Ok(Tensor::from_vec(data, &out_shape)?)
}

/// Splits a [N,...] batch into per-sample constant tensors.
pub fn split_batch(batch: &Tensor) -> Result<Vec<Tensor>> {
    let shape = batch.shape();
    let n = shape[0];
    let per = batch.numel() / n.max(1);
    let d = batch.data();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(Tensor::from_vec(
            d[i * per..(i + 1) * per].to_vec(),
            &shape[1..],
        )?);
    }
    Ok(out)
}

fn wrap_iter_err<E: Into<CoreError>>(iter: u64) -> impl FnOnce(E) -> CoreError {
    move |source| match source.into() {
        CoreError::Tensor(source) => CoreError::TrainingAborted { iter, source },
        other => other,
    }
}

/// Runs the configured training loop. Per discriminator batch: half real
/// images and half fresh fakes, gradients accumulated over both halves and
/// applied in one step; the generator then trains on the discriminator's
/// feedback over batch_size new fakes. Sample grids are emitted every
/// `sample_every_epochs`, checkpoints every epoch.
pub fn train(cfg: &TrainConfig, data: &Dataset, outdir: &Path) -> Result<TrainOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(outdir)?;
    match cfg.model {
        ModelKind::Style => crate::style::train::train_style(cfg, data, outdir),
        _ => train_adversarial(cfg, data, outdir),
    }
}

fn train_adversarial(cfg: &TrainConfig, data: &Dataset, outdir: &Path) -> Result<TrainOutput> {
    let (c, h, w) = cfg.image;
    if data.image_shape() != [c, h, w] {
        return Err(CoreError::InvalidConfig(format!(
            "dataset images are {:?}, config expects {:?}",
            data.image_shape(),
            [c, h, w]
        )));
    }
    if cfg.loss != LossKind::Bce {
        return Err(CoreError::InvalidConfig(
            "the intro/DCGAN loops train with BCE".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (generator, discriminator) = match cfg.model {
        ModelKind::Intro => (
            intro_generator(cfg.latent_dim, cfg.image, cfg.leaky_slope, &mut rng)?,
            intro_discriminator(cfg.image, cfg.leaky_slope, cfg.dropout, &mut rng)?,
        ),
        ModelKind::Dcgan => (
            dcgan_generator(cfg.latent_dim, cfg.ngf, c, cfg.init, &mut rng)?,
            dcgan_discriminator(c, cfg.ndf, cfg.leaky_slope, cfg.init, &mut rng)?,
        ),
        ModelKind::Style => unreachable!("style runs use train_style"),
    };
    let mut g_opt = Adam::new(generator.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut d_opt = Adam::new(discriminator.params(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);

    let half = cfg.batch_size / 2;
    let iters_per_epoch = data.len() / cfg.batch_size;
    if iters_per_epoch == 0 {
        return Err(CoreError::InvalidConfig(format!(
            "dataset of {} images is smaller than one batch of {}",
            data.len(),
            cfg.batch_size
        )));
    }

    // fixed per-run grid latents keep epoch-over-epoch grids comparable
    let grid_n = 16usize;
    let grid_z = latent_batch(cfg, grid_n, &mut rng);

    let mut history = LossHistory::new();
    let mut checkpoint_paths = Vec::new();
    let mut sample_grid_paths = Vec::new();
    let mut d_step_real_counts = Vec::new();
    let mut iter: u64 = 0;

    let mut indices: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        for chunk in indices.chunks_exact(cfg.batch_size) {
            iter += 1;

            // --- discriminator: half real, half fake, one step ---
            let mut reals: Vec<Tensor> = chunk[..half].iter().map(|&i| data.get(i).clone()).collect();
            let z = latent_batch(cfg, half, &mut rng);
            let fake_batch = generator
                .forward(&z, Mode::Train, &mut rng)
                .map_err(wrap_iter_err(iter))?
                .detach();
            let mut fakes = split_batch(&fake_batch)?;
            if let Some(ratio) = cfg.noisy_label_ratio {
                noisy_labels(&mut reals, &mut fakes, ratio, &mut rng);
            }
            let mut real_labels = vec![1.0f32; half];
            if let Some((lo, hi)) = cfg.label_smoothing {
                smooth_labels(&mut real_labels, lo, hi, &mut rng);
            }
            let real_batch = stack_samples(&reals)?;
            let fake_batch = stack_samples(&fakes)?;
            let real_label_t = Tensor::from_vec(real_labels, &[half, 1])?;
            let fake_label_t = Tensor::zeros(&[half, 1]);

            let d_real = discriminator
                .forward(&real_batch, Mode::Train, &mut rng)
                .map_err(wrap_iter_err(iter))?;
            let d_fake = discriminator
                .forward(&fake_batch, Mode::Train, &mut rng)
                .map_err(wrap_iter_err(iter))?;
            let loss_real = bce(&d_real, &real_label_t).map_err(wrap_iter_err(iter))?;
            let loss_fake = bce(&d_fake, &fake_label_t).map_err(wrap_iter_err(iter))?;
            let d_loss = loss_real.add(&loss_fake).map_err(wrap_iter_err(iter))?;
            d_loss.backward().map_err(wrap_iter_err(iter))?;
            d_opt.step().map_err(wrap_iter_err(iter))?;
            d_opt.zero_grad();
            g_opt.zero_grad();
            d_step_real_counts.push(half);

            // --- generator: batch_size fresh fakes against the real label ---
            let z = latent_batch(cfg, cfg.batch_size, &mut rng);
            let fake = generator
                .forward(&z, Mode::Train, &mut rng)
                .map_err(wrap_iter_err(iter))?;
            let d_out = discriminator
                .forward(&fake, Mode::Train, &mut rng)
                .map_err(wrap_iter_err(iter))?;
            let target = Tensor::ones(&[cfg.batch_size, 1]);
            let g_loss = bce(&d_out, &target).map_err(wrap_iter_err(iter))?;
            g_loss.backward().map_err(wrap_iter_err(iter))?;
            g_opt.step().map_err(wrap_iter_err(iter))?;
            g_opt.zero_grad();
            d_opt.zero_grad();

            history.push(LossRecord {
                iter,
                g_loss: g_loss.item(),
                d_loss: d_loss.item(),
                p: None,
                rt: None,
                kimg: None,
            })?;
        }

        let ckpt_path = outdir.join(format!("network-epoch{:04}.agck", epoch + 1));
        let model = match cfg.model {
            ModelKind::Intro => GanModel::Intro {
                g: &generator,
                d: &discriminator,
                latent: cfg.latent_dim,
                image: cfg.image,
                leaky: cfg.leaky_slope,
                dropout: cfg.dropout,
            },
            _ => GanModel::Dcgan {
                g: &generator,
                d: &discriminator,
                latent: cfg.latent_dim,
                image: cfg.image,
                ngf: cfg.ngf,
                ndf: cfg.ndf,
                init: cfg.init,
                leaky: cfg.leaky_slope,
            },
        };
        save_network(&ckpt_path, &model)?;
        checkpoint_paths.push(ckpt_path);

        if (epoch + 1) % cfg.sample_every_epochs.max(1) == 0 {
            let samples = generator.forward(&grid_z, Mode::Eval, &mut rng)?;
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

/// Latents shaped for the model family: [N,L] dense, [N,L,1,1] for DCGAN.
pub fn latent_batch<R: Rng>(cfg: &TrainConfig, n: usize, rng: &mut R) -> Tensor {
    match cfg.model {
        ModelKind::Dcgan => Tensor::randn(&[n, cfg.latent_dim, 1, 1], rng),
        _ => Tensor::randn(&[n, cfg.latent_dim], rng),
    }
}
