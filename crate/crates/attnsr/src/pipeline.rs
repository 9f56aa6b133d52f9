//! Command-line surface: dataset preparation, training, evaluation, and
//! single-image inference/mask export. The binary in `src/main.rs` is a
//! thin wrapper around [`run`]; everything here is ordinary library code so
//! the commands are testable in-process.

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand};

use crate::imaging::{load_png, resize_bicubic, save_png, ImageBuffer};
use crate::train::{
    evaluate, super_resolve, train, Checkpoint, EvalSubject, RunConfig, TrainOptions,
};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "attnsr",
    version,
    about = "Attention-masked single-image super resolution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Crop a directory of HR images to scale multiples and write the
    /// matching LR and bicubic-ILR trees plus a manifest.
    Prepare {
        /// Directory of ground-truth PNG images.
        #[arg(long)]
        hr_dir: PathBuf,
        /// Upscaling factor the dataset targets.
        #[arg(long)]
        scale: usize,
        /// Output root; receives hr/, lr/, ilr/ and manifest.txt.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model from a JSON run configuration.
    Train {
        /// Path to the run-config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Where checkpoints (and mask snapshots) go. Defaults to `run`
        /// next to the config file.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Save the first validation image's mask every N epochs (0 = off).
        #[arg(long = "mask-snapshots", default_value_t = 0, value_name = "N")]
        mask_snapshots: usize,
    },
    /// Score a checkpoint (or the bicubic baseline) over a manifest,
    /// emitting per-image CSV plus a mean row.
    #[command(group = ArgGroup::new("subject").required(true).args(["ckpt", "bicubic"]))]
    Eval {
        /// Checkpoint to evaluate.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Evaluate plain bicubic upscaling instead of a model.
        #[arg(long)]
        bicubic: bool,
        /// Manifest of ground-truth images.
        #[arg(long)]
        manifest: PathBuf,
        /// Upscaling factor; must match the checkpoint.
        #[arg(long)]
        scale: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Super-resolve one PNG.
    Sr {
        #[arg(long)]
        ckpt: PathBuf,
        /// Low-resolution input PNG (any size).
        #[arg(long)]
        input: PathBuf,
        /// Where the upscaled PNG goes.
        #[arg(long)]
        output: PathBuf,
    },
    /// Export the attention mask and the masked residual for one PNG.
    Mask {
        #[arg(long)]
        ckpt: PathBuf,
        /// Low-resolution input PNG (any size).
        #[arg(long)]
        input: PathBuf,
        /// Grayscale mask output path.
        #[arg(long = "mask-out")]
        mask_out: PathBuf,
        /// Masked-residual visualization output path.
        #[arg(long = "residual-out")]
        residual_out: PathBuf,
    },
}

/// Map an error to the process exit code: 1 for usage/config problems,
/// 2 for runtime failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument { .. } | Error::InvalidConfig { .. } => 1,
        _ => 2,
    }
}

/// Execute one subcommand. `Ok(code)` is the exit code for runs that
/// completed but may still signal partial failure (per-image evaluation
/// errors); hard errors come back as `Err`.
pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Prepare { hr_dir, scale, out_dir } => {
            eprintln!(
                "prepare: hr_dir={} scale={} out_dir={}",
                hr_dir.display(),
                scale,
                out_dir.display()
            );
            let summary = prepare(&hr_dir, scale, &out_dir)?;
            println!(
                "prepared {} image(s) ({} skipped) -> {}",
                summary.processed.len(),
                summary.skipped.len(),
                summary.manifest.display()
            );
            Ok(0)
        }
        Command::Train { config, out_dir, resume, mask_snapshots } => {
            let run_config = RunConfig::load(&config)?;
            eprintln!(
                "train: {}",
                serde_json::to_string_pretty(&run_config).expect("config serializes")
            );
            let out_dir = out_dir.unwrap_or_else(|| {
                config.parent().unwrap_or_else(|| Path::new(".")).join("run")
            });
            let mut opts = TrainOptions::new(out_dir);
            opts.resume = resume;
            opts.mask_snapshot_every = mask_snapshots;
            let report = train(&run_config, &opts)?;
            if report.best_epoch > 0 {
                println!(
                    "best epoch {}: val_psnr {:.3} dB -> {}",
                    report.best_epoch,
                    report.best_psnr,
                    report.best_checkpoint.display()
                );
            }
            if report.stopped_early {
                println!("stopped early: no improvement for {} epochs", run_config.early_stop_patience);
            }
            Ok(0)
        }
        Command::Eval { ckpt, bicubic, manifest, scale, out } => {
            let subject_desc = match &ckpt {
                Some(p) => format!("ckpt={}", p.display()),
                None => "bicubic".to_string(),
            };
            eprintln!(
                "eval: subject={} manifest={} scale={}",
                subject_desc,
                manifest.display(),
                scale
            );
            debug_assert!(ckpt.is_some() != bicubic, "clap enforces exactly one subject");
            let model = match &ckpt {
                Some(path) => Some(Checkpoint::read(path)?.restore_model()?),
                None => None,
            };
            let subject = match &model {
                Some(m) => EvalSubject::Model(m),
                None => EvalSubject::Bicubic,
            };
            let report = evaluate(&subject, &manifest, scale)?;
            let csv = report.to_csv();
            match &out {
                Some(path) => {
                    std::fs::write(path, &csv).map_err(|e| Error::io(path, e))?;
                }
                None => print!("{csv}"),
            }
            eprintln!(
                "scored {} image(s): mean psnr {:.4} dB, mean ssim {:.4} ({} exact match(es), {} failure(s))",
                report.rows.len(),
                report.mean_psnr_db,
                report.mean_ssim,
                report.infinite_psnr.len(),
                report.failures.len()
            );
            Ok(if report.failures.is_empty() { 0 } else { 2 })
        }
        Command::Sr { ckpt, input, output } => {
            eprintln!(
                "sr: ckpt={} input={} output={}",
                ckpt.display(),
                input.display(),
                output.display()
            );
            let model = Checkpoint::read(&ckpt)?.restore_model()?;
            let lr = load_png(&input)?;
            let result = super_resolve(&model, &lr)?;
            save_png(&output, &result.hr)?;
            println!(
                "{}x{} -> {}x{} ({})",
                lr.height(),
                lr.width(),
                result.hr.height(),
                result.hr.width(),
                output.display()
            );
            Ok(0)
        }
        Command::Mask { ckpt, input, mask_out, residual_out } => {
            eprintln!(
                "mask: ckpt={} input={} mask_out={} residual_out={}",
                ckpt.display(),
                input.display(),
                mask_out.display(),
                residual_out.display()
            );
            let model = Checkpoint::read(&ckpt)?.restore_model()?;
            let lr = load_png(&input)?;
            let result = super_resolve(&model, &lr)?;
            save_png(&mask_out, &result.mask)?;
            let (viz, lo, hi) = remap_masked_residual(&result.residual, &result.mask);
            println!("residual range: [{lo:.6}, {hi:.6}] remapped to [0, 255]");
            save_png(&residual_out, &viz)?;
            Ok(0)
        }
    }
}

#[derive(Debug)]
pub struct PrepareSummary {
    /// Image stems that made it into the manifest, in manifest order.
    pub processed: Vec<String>,
    /// (file name, reason) for every skipped input.
    pub skipped: Vec<(String, String)>,
    pub manifest: PathBuf,
}

/// Build an evaluation/training dataset from a directory of PNGs: each image
/// is cropped to a multiple of `scale` (written under `hr/`), bicubically
/// downscaled (`lr/`), and upscaled back (`ilr/`). Reruns are byte-identical.
pub fn prepare(hr_dir: &Path, scale: usize, out_dir: &Path) -> Result<PrepareSummary> {
    if scale == 0 {
        return Err(Error::invalid("prepare", "scale must be positive"));
    }
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(hr_dir)
        .map_err(|e| Error::io(hr_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|ext| ext.eq_ignore_ascii_case("png"))
                .unwrap_or(false)
        })
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        return Err(Error::invalid(
            "prepare",
            format!("no PNG images in {}", hr_dir.display()),
        ));
    }

    for sub in ["hr", "lr", "ilr"] {
        let dir = out_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut processed = Vec::new();
    let mut skipped = Vec::new();
    let mut manifest_lines = String::from("# ground-truth images, one per line\n");
    for path in &inputs {
        let file_name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        match prepare_one(path, scale, out_dir) {
            Ok(()) => {
                manifest_lines.push_str(&format!("hr/{file_name}\n"));
                processed.push(file_name);
            }
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                skipped.push((file_name, e.to_string()));
            }
        }
    }
    if processed.is_empty() {
        return Err(Error::invalid(
            "prepare",
            format!("all {} image(s) in {} failed", skipped.len(), hr_dir.display()),
        ));
    }
    let manifest = out_dir.join("manifest.txt");
    std::fs::write(&manifest, manifest_lines).map_err(|e| Error::io(&manifest, e))?;
    Ok(PrepareSummary { processed, skipped, manifest })
}

fn prepare_one(path: &Path, scale: usize, out_dir: &Path) -> Result<()> {
    let img = load_png(path)?;
    if img.height() < scale || img.width() < scale {
        return Err(Error::invalid(
            "prepare",
            format!("{}x{} is smaller than the scale", img.height(), img.width()),
        ));
    }
    let hr = img.modcrop(scale);
    // Quantize LR exactly as the PNG writer will, so the saved ILR matches
    // what a consumer would compute from the saved LR.
    let lr = quantize8(&resize_bicubic(&hr, hr.height() / scale, hr.width() / scale)?);
    let ilr = resize_bicubic(&lr, hr.height(), hr.width())?;
    let file_name = path.file_name().expect("inputs come from read_dir");
    save_png(&out_dir.join("hr").join(file_name), &hr)?;
    save_png(&out_dir.join("lr").join(file_name), &lr)?;
    save_png(&out_dir.join("ilr").join(file_name), &ilr)
}

/// Clamp to [0,1] and snap every sample to the nearest 8-bit level.
fn quantize8(img: &ImageBuffer) -> ImageBuffer {
    let data = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
        .collect();
    ImageBuffer::new(img.channels(), img.height(), img.width(), data)
        .expect("same extents as the input image")
}

/// Multiply the residual by the (broadcast) mask and linearly remap the
/// result from its own [min, max] onto [0, 1] for 8-bit export. Returns the
/// remapped image along with the range. A constant field maps to all zeros.
fn remap_masked_residual(residual: &ImageBuffer, mask: &ImageBuffer) -> (ImageBuffer, f32, f32) {
    let plane = residual.height() * residual.width();
    let masked: Vec<f32> = residual
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * mask.data()[i % plane])
        .collect();
    let lo = masked.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = masked.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = hi - lo;
    let data = masked
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect();
    let viz = ImageBuffer::new(residual.channels(), residual.height(), residual.width(), data)
        .expect("same extents as the input image");
    (viz, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::synthetic_texture;

    #[test]
    fn prepare_crops_and_writes_all_three_trees() {
        let dir = tempfile::tempdir().unwrap();
        let hr_dir = dir.path().join("src");
        std::fs::create_dir(&hr_dir).unwrap();
        save_png(&hr_dir.join("a.png"), &synthetic_texture(101, 101, 1)).unwrap();
        let out = dir.path().join("data");
        let summary = prepare(&hr_dir, 2, &out).unwrap();
        assert_eq!(summary.processed, vec!["a.png".to_string()]);
        let hr = load_png(&out.join("hr/a.png")).unwrap();
        let lr = load_png(&out.join("lr/a.png")).unwrap();
        let ilr = load_png(&out.join("ilr/a.png")).unwrap();
        assert_eq!((hr.height(), hr.width()), (100, 100));
        assert_eq!((lr.height(), lr.width()), (50, 50));
        assert_eq!((ilr.height(), ilr.width()), (100, 100));
        let manifest = std::fs::read_to_string(&summary.manifest).unwrap();
        assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 1);
    }

    #[test]
    fn prepare_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let hr_dir = dir.path().join("src");
        std::fs::create_dir(&hr_dir).unwrap();
        save_png(&hr_dir.join("a.png"), &synthetic_texture(33, 47, 2)).unwrap();
        let out = dir.path().join("data");
        prepare(&hr_dir, 3, &out).unwrap();
        let before: Vec<Vec<u8>> = ["hr/a.png", "lr/a.png", "ilr/a.png", "manifest.txt"]
            .iter()
            .map(|p| std::fs::read(out.join(p)).unwrap())
            .collect();
        prepare(&hr_dir, 3, &out).unwrap();
        let after: Vec<Vec<u8>> = ["hr/a.png", "lr/a.png", "ilr/a.png", "manifest.txt"]
            .iter()
            .map(|p| std::fs::read(out.join(p)).unwrap())
            .collect();
        assert_eq!(before, after, "rerun must reproduce identical bytes");
    }

    #[test]
    fn prepare_skips_unreadable_and_errors_when_nothing_survives() {
        let dir = tempfile::tempdir().unwrap();
        let hr_dir = dir.path().join("src");
        std::fs::create_dir(&hr_dir).unwrap();
        std::fs::write(hr_dir.join("broken.png"), b"junk").unwrap();
        save_png(&hr_dir.join("ok.png"), &synthetic_texture(32, 32, 3)).unwrap();
        let summary = prepare(&hr_dir, 2, &dir.path().join("out")).unwrap();
        assert_eq!(summary.processed.len(), 1);
        assert_eq!(summary.skipped.len(), 1);

        let only_bad = dir.path().join("bad");
        std::fs::create_dir(&only_bad).unwrap();
        std::fs::write(only_bad.join("broken.png"), b"junk").unwrap();
        let err = prepare(&only_bad, 2, &dir.path().join("out2")).unwrap_err();
        assert!(err.to_string().contains("failed"));

        let empty = dir.path().join("empty");
        std::fs::create_dir(&empty).unwrap();
        let err = prepare(&empty, 2, &dir.path().join("out3")).unwrap_err();
        assert!(err.to_string().contains("no PNG images"));
    }

    #[test]
    fn residual_remap_covers_full_range() {
        let residual = ImageBuffer::new(1, 2, 2, vec![-0.5, 0.0, 0.25, 1.5]).unwrap();
        let mask = ImageBuffer::filled(1, 2, 2, 1.0);
        let (viz, lo, hi) = remap_masked_residual(&residual, &mask);
        assert_eq!((lo, hi), (-0.5, 1.5));
        let d = viz.data();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[3], 1.0);
        assert!(d.iter().all(|&v| (0.0..=1.0).contains(&v)));

        let flat = ImageBuffer::filled(3, 2, 2, 0.7);
        let (viz, lo, hi) = remap_masked_residual(&flat, &mask);
        assert_eq!(lo, hi);
        assert!(viz.data().iter().all(|&v| v == 0.0));
    }
}
