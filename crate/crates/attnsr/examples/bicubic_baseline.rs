//! Scores plain bicubic upscaling over a directory of ground-truth images:
//! each image is cropped to a scale multiple, downscaled, upscaled back,
//! and compared on the luma channel with border pixels excluded.
//!
//! Usage:
//!   cargo run --example bicubic_baseline -- [hr_dir] [scale]
//!
//! Without arguments it scores a small synthetic corpus at x2.

use std::io::Write as _;
use std::path::PathBuf;

use attnsr::imaging::write_toy_corpus;
use attnsr::train::{evaluate, EvalSubject};

fn main() -> attnsr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scale: usize = args.get(1).map(|s| s.parse().expect("scale")).unwrap_or(2);

    let manifest = match args.first() {
        Some(dir) => {
            // Build a manifest over every PNG in the directory.
            let dir = PathBuf::from(dir);
            let mut names: Vec<String> = std::fs::read_dir(&dir)
                .expect("readable directory")
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
                .collect();
            names.sort();
            assert!(!names.is_empty(), "no PNG images in {}", dir.display());
            // Manifest entries resolve relative to the manifest file, which
            // lives in the temp dir here, so list absolute paths.
            let manifest = std::env::temp_dir().join("attnsr_bicubic_baseline.txt");
            let dir = dir.canonicalize().expect("canonical dir");
            let mut text = String::new();
            for n in &names {
                text.push_str(&dir.join(n).to_string_lossy());
                text.push('\n');
            }
            std::fs::write(&manifest, text).expect("write manifest");
            manifest
        }
        None => {
            let root = std::env::temp_dir().join("attnsr_bicubic_baseline_corpus");
            let (_, val) = write_toy_corpus(&root, 0, 5, 96, 7)?;
            eprintln!("no directory given: scoring 5 synthetic images");
            val
        }
    };

    let report = evaluate(&EvalSubject::Bicubic, &manifest, scale)?;
    let mut out = std::io::stdout().lock();
    write!(out, "{}", report.to_csv()).expect("stdout");
    eprintln!(
        "bicubic x{scale}: mean psnr {:.4} dB, mean ssim {:.4} over {} image(s)",
        report.mean_psnr_db,
        report.mean_ssim,
        report.rows.len()
    );
    for (name, why) in &report.failures {
        eprintln!("skipped {name}: {why}");
    }
    Ok(())
}
