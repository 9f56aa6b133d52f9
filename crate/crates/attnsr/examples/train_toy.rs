//! Train the tiny reference configuration on a generated synthetic-texture
//! corpus and report the improvement over the bicubic baseline.
//!
//! Usage: `cargo run --example train_toy [epochs] [steps_per_epoch]`
//! (defaults: 20 epochs x 100 steps).

use attnsr::imaging::write_toy_corpus;
use attnsr::train::{evaluate, train, EvalSubject, RunConfig, TrainOptions};

fn main() -> attnsr::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);

    let root = std::env::temp_dir().join("attnsr_train_toy");
    let corpus = root.join("corpus");
    let (train_manifest, val_manifest) = write_toy_corpus(&corpus, 20, 4, 96, 7)?;
    println!("corpus: 20 train / 4 val synthetic textures in {}", corpus.display());

    let config = RunConfig {
        scale: 2,
        base_channels: 16,
        denseres_blocks: 2,
        resblocks_per_block: 2,
        attn_base_channels: 8,
        attn_growth: 8,
        attn_convs_per_dense_block: 2,
        patch_size: 24,
        batch_size: 16,
        max_epochs: epochs,
        lr0: 1e-3,
        lr_halve_every: 8,
        early_stop_patience: 0,
        seed: 7,
        train_manifest,
        val_manifest,
        steps_per_epoch: steps,
    };

    let baseline = evaluate(&EvalSubject::Bicubic, &config.val_manifest, config.scale)?;
    println!(
        "bicubic baseline: {:.3} dB / ssim {:.4}",
        baseline.mean_psnr_db, baseline.mean_ssim
    );

    let started = std::time::Instant::now();
    let report = train(&config, &TrainOptions::new(root.join("run")))?;
    println!(
        "trained {} steps in {:.1}s; best val psnr {:.3} dB at epoch {} ({:+.3} dB vs bicubic)",
        report.step_losses.len(),
        started.elapsed().as_secs_f64(),
        report.best_psnr,
        report.best_epoch,
        report.best_psnr - baseline.mean_psnr_db
    );
    println!("checkpoints: {}", report.best_checkpoint.display());
    Ok(())
}
