//! The training loop: patch sampling, L1 optimization with Adam and a
//! step-decay schedule, per-epoch validation, checkpointing, and early
//! stopping. Runs are deterministic for a fixed seed and resumable from a
//! checkpoint without changing the realized sample stream.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{Checkpoint, DATA_STREAM, INIT_STREAM};
use super::{
    augment, evaluate, l1_loss, lr_schedule, sample_patch, stack_images, Adam, EvalSubject,
    RunConfig, TrainSet,
};
use crate::imaging::{load_png, resize_bicubic, save_png};
use crate::model::AttnSrModel;
use crate::nn::Mode;
use crate::tensor::Graph;
use crate::train::eval::super_resolve;
use crate::{Error, Result};

pub struct TrainOptions {
    /// Directory for checkpoints and snapshots (created if missing).
    pub out_dir: PathBuf,
    /// Continue from this checkpoint instead of initializing from the seed.
    pub resume: Option<PathBuf>,
    /// When nonzero, save the predicted mask of the first validation image
    /// every this-many epochs under `out_dir/masks/`.
    pub mask_snapshot_every: usize,
}

impl TrainOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> TrainOptions {
        TrainOptions {
            out_dir: out_dir.into(),
            resume: None,
            mask_snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpochLog {
    /// 1-based index of the completed epoch.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_logs: Vec<EpochLog>,
    /// Every per-step training loss, in order, across all epochs this call
    /// ran (useful for convergence checks).
    pub step_losses: Vec<f32>,
    /// Best validation PSNR seen (negative infinity if never validated).
    pub best_psnr: f64,
    /// 1-based epoch that produced `best_psnr` (0 if never validated).
    pub best_epoch: usize,
    pub stopped_early: bool,
    /// Written whenever validation PSNR improves.
    pub best_checkpoint: PathBuf,
    /// Written after every epoch.
    pub last_checkpoint: PathBuf,
}

/// Train a model as described by `config`, writing checkpoints under
/// `opts.out_dir`. A non-finite training loss aborts with
/// [`Error::Diverged`]. With `steps_per_epoch == 0` the function only
/// writes an initial checkpoint and returns.
pub fn train(config: &RunConfig, opts: &TrainOptions) -> Result<TrainReport> {
    config.validate()?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let train_set = TrainSet::load(&config.train_manifest, config.scale, config.patch_size)?;

    let resume_ckpt = match &opts.resume {
        Some(path) => Some(Checkpoint::read(path)?),
        None => None,
    };
    let model = match &resume_ckpt {
        Some(ckpt) => {
            if ckpt.header.model != config.model_config() {
                return Err(Error::invalid(
                    "train",
                    "checkpoint architecture does not match the run config",
                ));
            }
            ckpt.restore_model()?
        }
        None => {
            let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
            init_rng.set_stream(INIT_STREAM);
            AttnSrModel::new(config.model_config(), &mut init_rng)?
        }
    };
    let params = model.named_params();
    let mut adam = match &resume_ckpt {
        Some(ckpt) => ckpt.restore_adam(&params)?,
        None => Adam::new(&params),
    };
    let mut data_rng = match &resume_ckpt {
        Some(ckpt) => ckpt.header.rng.data_rng()?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(DATA_STREAM);
            rng
        }
    };
    let start_epoch = resume_ckpt.as_ref().map_or(0, |c| c.header.epoch);
    let mut best_psnr = resume_ckpt
        .as_ref()
        .and_then(|c| c.header.best_psnr())
        .unwrap_or(f64::NEG_INFINITY);
    let mut best_epoch = resume_ckpt
        .as_ref()
        .and_then(|c| c.header.best_epoch)
        .unwrap_or(0);
    let mut epochs_since_best = if best_epoch > 0 {
        start_epoch.saturating_sub(best_epoch)
    } else {
        start_epoch
    };

    let mut report = TrainReport {
        epoch_logs: Vec::new(),
        step_losses: Vec::new(),
        best_psnr,
        best_epoch,
        stopped_early: false,
        best_checkpoint: opts.out_dir.join("best.ckpt"),
        last_checkpoint: opts.out_dir.join("last.ckpt"),
    };
    let snapshot = |epoch: usize,
                    best_psnr: f64,
                    best_epoch: usize,
                    adam: &Adam,
                    data_rng: &ChaCha8Rng| {
        Checkpoint::capture(
            &model,
            Some(config),
            epoch,
            (best_psnr > f64::NEG_INFINITY).then_some(best_psnr),
            (best_epoch > 0).then_some(best_epoch),
            adam,
            data_rng,
        )
    };

    if config.steps_per_epoch == 0 {
        snapshot(start_epoch, best_psnr, best_epoch, &adam, &data_rng)
            .write(&report.last_checkpoint)?;
        return Ok(report);
    }

    let n_images = train_set.images.len();
    let mut global_step = adam.step_count();
    for epoch in start_epoch..config.max_epochs {
        let lr = lr_schedule(config.lr0, config.lr_halve_every, epoch);
        let started = Instant::now();
        let mut loss_sum = 0.0f64;
        for step in 0..config.steps_per_epoch {
            let mut lr_patches = Vec::with_capacity(config.batch_size);
            let mut ilr_patches = Vec::with_capacity(config.batch_size);
            let mut hr_patches = Vec::with_capacity(config.batch_size);
            for _ in 0..config.batch_size {
                let idx = data_rng.gen_range(0..n_images);
                let (lp, ip, hp) = sample_patch(
                    &train_set.images[idx].1,
                    config.scale,
                    config.patch_size,
                    &mut data_rng,
                )?;
                let (lp, ip, hp) = augment(&lp, &ip, &hp, &mut data_rng);
                lr_patches.push(lp);
                ilr_patches.push(ip);
                hr_patches.push(hp);
            }
            let lr_t = stack_images(&lr_patches);
            let ilr_t = stack_images(&ilr_patches);
            let hr_t = stack_images(&hr_patches);

            let g = Graph::new();
            let (pred, _mask) = model.forward(&g, &lr_t, &ilr_t, Mode::Train)?;
            let loss = l1_loss(&g, &pred, &hr_t)?;
            let loss_value = loss.data()[0];
            global_step += 1;
            if !loss_value.is_finite() {
                eprintln!(
                    "training diverged: epoch {}, step {} (global step {}), lr {:.3e}, loss {}",
                    epoch + 1,
                    step + 1,
                    global_step,
                    lr,
                    loss_value
                );
                return Err(Error::Diverged { step: global_step });
            }
            report.step_losses.push(loss_value);
            loss_sum += loss_value as f64;
            g.backward(&loss)?;
            adam.step(&params, lr)?;
        }
        let train_loss = loss_sum / config.steps_per_epoch as f64;

        let val = evaluate(&EvalSubject::Model(&model), &config.val_manifest, config.scale)?;
        if let Some((name, why)) = val.failures.first() {
            return Err(Error::invalid(
                "train",
                format!("validation image {name} could not be scored: {why}"),
            ));
        }
        let completed = epoch + 1;
        let seconds = started.elapsed().as_secs_f64();
        println!(
            "epoch {completed:>3}  lr {lr:.3e}  train_loss {train_loss:.5}  \
             val_psnr {:.3} dB  val_ssim {:.4}  {seconds:.1}s",
            val.mean_psnr_db, val.mean_ssim
        );
        report.epoch_logs.push(EpochLog {
            epoch: completed,
            lr,
            train_loss,
            val_psnr: val.mean_psnr_db,
            val_ssim: val.mean_ssim,
            seconds,
        });

        let improved = val.mean_psnr_db > best_psnr;
        if improved {
            best_psnr = val.mean_psnr_db;
            best_epoch = completed;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
        }
        let ckpt = snapshot(completed, best_psnr, best_epoch, &adam, &data_rng);
        ckpt.write(&report.last_checkpoint)?;
        if improved {
            ckpt.write(&report.best_checkpoint)?;
        }
        if opts.mask_snapshot_every > 0 && completed % opts.mask_snapshot_every == 0 {
            write_mask_snapshot(&model, config, &opts.out_dir, completed)?;
        }
        if config.early_stop_patience > 0 && epochs_since_best >= config.early_stop_patience {
            report.stopped_early = true;
            break;
        }
    }
    report.best_psnr = best_psnr;
    report.best_epoch = best_epoch;
    Ok(report)
}

/// Save the current mask prediction for the first validation image, so a
/// run leaves behind a visual record of how the blending field evolved.
fn write_mask_snapshot(
    model: &AttnSrModel<f32>,
    config: &RunConfig,
    out_dir: &Path,
    epoch: usize,
) -> Result<()> {
    let paths = super::read_manifest(&config.val_manifest)?;
    let Some(first) = paths.first() else {
        return Ok(());
    };
    let hr = load_png(first)?.modcrop(config.scale);
    let lr = resize_bicubic(&hr, hr.height() / config.scale, hr.width() / config.scale)?.clamp01();
    let result = super_resolve(model, &lr)?;
    let path = out_dir.join("masks").join(format!("epoch{epoch:03}.png"));
    save_png(&path, &result.mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::write_toy_corpus;

    fn toy_config(dir: &Path, seed: u64) -> RunConfig {
        let (train_manifest, val_manifest) = write_toy_corpus(dir, 2, 1, 32, seed).unwrap();
        RunConfig {
            scale: 2,
            base_channels: 4,
            denseres_blocks: 1,
            resblocks_per_block: 1,
            attn_base_channels: 4,
            attn_growth: 4,
            attn_convs_per_dense_block: 1,
            patch_size: 8,
            batch_size: 2,
            max_epochs: 2,
            lr0: 1e-3,
            lr_halve_every: 10,
            early_stop_patience: 10,
            seed,
            train_manifest,
            val_manifest,
            steps_per_epoch: 2,
        }
    }

    #[test]
    fn zero_steps_writes_initial_checkpoint_and_returns() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path(), 1);
        config.steps_per_epoch = 0;
        let opts = TrainOptions::new(dir.path().join("run"));
        let report = train(&config, &opts).unwrap();
        assert!(report.epoch_logs.is_empty());
        assert!(report.step_losses.is_empty());
        assert!(report.last_checkpoint.exists());
        assert!(!report.best_checkpoint.exists());
        let ckpt = Checkpoint::read(&report.last_checkpoint).unwrap();
        assert_eq!(ckpt.header.epoch, 0);
        assert_eq!(ckpt.header.adam_t, 0);
        assert_eq!(ckpt.header.train.as_ref().unwrap(), &config);
        ckpt.restore_model().unwrap();
    }

    #[test]
    fn short_run_logs_and_checkpoints_every_epoch() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path(), 2);
        let opts = TrainOptions::new(dir.path().join("run"));
        let report = train(&config, &opts).unwrap();
        assert_eq!(report.epoch_logs.len(), 2);
        assert_eq!(report.step_losses.len(), 4);
        assert!(report.step_losses.iter().all(|l| l.is_finite()));
        assert!(report.last_checkpoint.exists());
        assert!(report.best_checkpoint.exists(), "first epoch always improves");
        assert!(report.best_epoch >= 1);
        assert!(report.best_psnr.is_finite());
        let last = Checkpoint::read(&report.last_checkpoint).unwrap();
        assert_eq!(last.header.epoch, 2);
        assert_eq!(last.header.adam_t, 4);
        assert_eq!(report.epoch_logs[0].epoch, 1);
        assert_eq!(report.epoch_logs[0].lr, 1e-3);
    }

    #[test]
    fn identical_seeds_give_identical_losses() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path(), 3);
        let a = train(&config, &TrainOptions::new(dir.path().join("a"))).unwrap();
        let b = train(&config, &TrainOptions::new(dir.path().join("b"))).unwrap();
        let bits = |xs: &[f32]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.step_losses), bits(&b.step_losses));
        assert_eq!(
            a.epoch_logs.last().unwrap().val_psnr.to_bits(),
            b.epoch_logs.last().unwrap().val_psnr.to_bits()
        );
    }

    #[test]
    fn resume_reproduces_the_uninterrupted_run_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path(), 4);

        // Uninterrupted: two epochs in one call.
        let full = train(&config, &TrainOptions::new(dir.path().join("full"))).unwrap();

        // Interrupted: one epoch, then resume for the second.
        let mut half_config = config.clone();
        half_config.max_epochs = 1;
        let half = train(&half_config, &TrainOptions::new(dir.path().join("half"))).unwrap();
        let mut resume_opts = TrainOptions::new(dir.path().join("half"));
        resume_opts.resume = Some(half.last_checkpoint.clone());
        let resumed = train(&config, &resume_opts).unwrap();

        assert_eq!(resumed.epoch_logs.len(), 1, "only the second epoch remains");
        assert_eq!(resumed.epoch_logs[0].epoch, 2);
        let bits = |xs: &[f32]| xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(
            bits(&resumed.step_losses),
            bits(&full.step_losses[2..]),
            "resumed steps must replay the uninterrupted sample stream"
        );
        assert_eq!(
            resumed.epoch_logs[0].val_psnr.to_bits(),
            full.epoch_logs[1].val_psnr.to_bits()
        );

        // And the final parameters match bit for bit.
        let a = Checkpoint::read(&full.last_checkpoint).unwrap().restore_model().unwrap();
        let b = Checkpoint::read(&resumed.last_checkpoint).unwrap().restore_model().unwrap();
        for ((name, pa), (_, pb)) in a.named_params().into_iter().zip(b.named_params()) {
            let (ta, tb) = (pa.tensor(), pb.tensor());
            let (ba, bb): (Vec<u32>, Vec<u32>) = (
                ta.data().iter().map(|v| v.to_bits()).collect(),
                tb.data().iter().map(|v| v.to_bits()).collect(),
            );
            assert_eq!(ba, bb, "parameter {name} diverged after resume");
        }
    }

    #[test]
    fn resume_rejects_mismatched_architecture() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path(), 5);
        config.steps_per_epoch = 0;
        let opts = TrainOptions::new(dir.path().join("run"));
        let report = train(&config, &opts).unwrap();
        config.base_channels = 8;
        config.steps_per_epoch = 1;
        let mut resume_opts = TrainOptions::new(dir.path().join("run"));
        resume_opts.resume = Some(report.last_checkpoint.clone());
        let err = train(&config, &resume_opts).unwrap_err();
        assert!(err.to_string().contains("does not match"));
    }

    #[test]
    fn mask_snapshots_are_written_on_schedule() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path(), 6);
        config.steps_per_epoch = 1;
        let mut opts = TrainOptions::new(dir.path().join("run"));
        opts.mask_snapshot_every = 2;
        train(&config, &opts).unwrap();
        let masks = dir.path().join("run/masks");
        assert!(!masks.join("epoch001.png").exists());
        assert!(masks.join("epoch002.png").exists());
    }
}
