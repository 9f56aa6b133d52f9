//! Whole-image inference and manifest-driven evaluation.
//!
//! The metric protocol mirrors the standard benchmark convention: crop the
//! ground truth to a multiple of the scale, degrade it bicubically, predict,
//! clamp, convert both sides to luma, trim a `scale`-pixel border, then
//! compare with PSNR and SSIM.

use std::path::Path;

use crate::imaging::{load_png, psnr, resize_bicubic, ssim, ImageBuffer};
use crate::model::{compose, AttnSrModel};
use crate::nn::Mode;
use crate::tensor::Graph;
use crate::{Error, Result};

/// What produces the high-resolution estimate during evaluation.
pub enum EvalSubject<'a> {
    Model(&'a AttnSrModel<f32>),
    /// Plain bicubic upscaling — the reference baseline every model is
    /// compared against.
    Bicubic,
}

#[derive(Debug, Clone)]
pub struct EvalRow {
    pub name: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Mean over rows with finite PSNR.
    pub mean_psnr_db: f64,
    /// Mean over all scored rows.
    pub mean_ssim: f64,
    /// Names of images whose prediction matched the ground truth exactly
    /// (infinite PSNR); excluded from `mean_psnr_db`.
    pub infinite_psnr: Vec<String>,
    /// Images that could not be scored, with the reason. They are excluded
    /// from every aggregate.
    pub failures: Vec<(String, String)>,
}

impl EvalReport {
    /// Render as CSV: a header, one row per image, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,psnr_db,ssim\n");
        for row in &self.rows {
            out.push_str(&format!("{},{:.4},{:.4}\n", row.name, row.psnr_db, row.ssim));
        }
        if !self.rows.is_empty() {
            out.push_str(&format!("mean,{:.4},{:.4}\n", self.mean_psnr_db, self.mean_ssim));
        }
        out
    }
}

/// Everything `super_resolve` produces for one low-resolution input.
pub struct SrResult {
    /// Composed prediction (not clamped; PNG export clamps on save).
    pub hr: ImageBuffer,
    /// Blending mask, single channel, every value strictly inside (0, 1).
    pub mask: ImageBuffer,
    /// Raw output of the residual branch before masking (unbounded).
    pub residual: ImageBuffer,
    /// The bicubically upscaled input the residual is added to.
    pub ilr: ImageBuffer,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Run the model on a whole low-resolution image of arbitrary size.
///
/// The mask branch pools twice, so its input sides must be divisible by 4.
/// To accept any size, the input is padded up to the next multiple of
/// `lcm(4, scale)` on the high-resolution grid (zero padding for the
/// low-resolution tensor, mirror padding for the upscaled one) and the
/// outputs are cropped back.
pub fn super_resolve(model: &AttnSrModel<f32>, lr: &ImageBuffer) -> Result<SrResult> {
    if lr.channels() != 3 {
        return Err(Error::invalid(
            "super_resolve",
            format!("expected a 3-channel image, got {} channels", lr.channels()),
        ));
    }
    let r = model.config().scale;
    let (rh, rw) = (lr.height() * r, lr.width() * r);
    let ilr = resize_bicubic(lr, rh, rw)?.clamp01();

    let unit = lcm(4, r);
    let (full_h, full_w) = (rh.next_multiple_of(unit), rw.next_multiple_of(unit));
    let lr_pad = lr.pad_bottom_right_zero((full_h - rh) / r, (full_w - rw) / r);
    let ilr_pad = ilr.pad_bottom_right_mirror(full_h - rh, full_w - rw);

    let g = Graph::disabled();
    let lr_t = lr_pad.to_tensor::<f32>();
    let ilr_t = ilr_pad.to_tensor::<f32>();
    let residual = model.feature_forward(&g, &lr_t, Mode::Eval)?;
    let mask = model.attention_forward(&g, &ilr_t, Mode::Eval)?;
    let hr = compose(&g, &residual, &mask, &ilr_t)?;

    let crop = |t| ImageBuffer::from_tensor::<f32>(t).map(|img| img.crop_top_left(rh, rw));
    Ok(SrResult {
        hr: crop(&hr)?,
        mask: crop(&mask)?,
        residual: crop(&residual)?,
        ilr,
    })
}

/// Score a subject against every ground-truth image in a manifest.
///
/// Images that fail to load or score are reported via `failures` (and a
/// warning on stderr) rather than aborting the whole run.
pub fn evaluate(subject: &EvalSubject<'_>, manifest: &Path, scale: usize) -> Result<EvalReport> {
    if scale == 0 {
        return Err(Error::invalid("evaluate", "scale must be positive"));
    }
    if let EvalSubject::Model(model) = subject {
        let trained_for = model.config().scale;
        if trained_for != scale {
            return Err(Error::invalid(
                "evaluate",
                format!("model upscales by {trained_for}, but the evaluation asked for {scale}"),
            ));
        }
    }
    let paths = super::read_manifest(manifest)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for path in paths {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        match score_one(subject, &path, scale) {
            Ok((psnr_db, ssim)) => rows.push(EvalRow { name, psnr_db, ssim }),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                failures.push((name, e.to_string()));
            }
        }
    }
    let infinite_psnr: Vec<String> = rows
        .iter()
        .filter(|r| r.psnr_db.is_infinite())
        .map(|r| r.name.clone())
        .collect();
    let finite: Vec<f64> = rows
        .iter()
        .map(|r| r.psnr_db)
        .filter(|p| p.is_finite())
        .collect();
    let mean_psnr_db = if !finite.is_empty() {
        finite.iter().sum::<f64>() / finite.len() as f64
    } else if !infinite_psnr.is_empty() {
        // Every scored image matched exactly.
        f64::INFINITY
    } else {
        f64::NAN
    };
    let mean_ssim = if rows.is_empty() {
        f64::NAN
    } else {
        rows.iter().map(|r| r.ssim).sum::<f64>() / rows.len() as f64
    };
    Ok(EvalReport { rows, mean_psnr_db, mean_ssim, infinite_psnr, failures })
}

fn score_one(subject: &EvalSubject<'_>, path: &Path, r: usize) -> Result<(f64, f64)> {
    let hr = load_png(path)?;
    if hr.height() < r || hr.width() < r {
        return Err(Error::invalid(
            "evaluate",
            format!("image {}x{} is smaller than the scale", hr.height(), hr.width()),
        ));
    }
    let hr = hr.modcrop(r);
    let lr = resize_bicubic(&hr, hr.height() / r, hr.width() / r)?;
    let sr = match subject {
        EvalSubject::Bicubic => resize_bicubic(&lr, hr.height(), hr.width())?,
        EvalSubject::Model(model) => super_resolve(model, &lr.clamp01())?.hr,
    }
    .clamp01();
    let hy = hr.rgb_to_y().crop_border(r)?;
    let sy = sr.rgb_to_y().crop_border(r)?;
    Ok((psnr(&hy, &sy)?, ssim(&hy, &sy)?))
}
