//! Dataset plumbing: manifests, aligned patch sampling, and the eight-way
//! dihedral augmentation.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::imaging::{load_png, resize_bicubic, ImageBuffer};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Parse a manifest: one image path per line, `#` comments and blank lines
/// ignored. Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::io(path, source))?;
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p = PathBuf::from(line);
        out.push(if p.is_relative() { dir.join(p) } else { p });
    }
    if out.is_empty() {
        return Err(Error::invalid(
            "read_manifest",
            format!("{}: no image entries", path.display()),
        ));
    }
    Ok(out)
}

/// Training images held in memory, already cropped to multiples of the
/// upscaling factor. Images too small for the configured patch are skipped
/// with a warning at load time.
pub struct TrainSet {
    pub images: Vec<(String, ImageBuffer)>,
}

impl TrainSet {
    pub fn load(manifest: &Path, scale: usize, patch_size: usize) -> Result<TrainSet> {
        let need = patch_size * scale;
        let mut images = Vec::new();
        for path in read_manifest(manifest)? {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            let hr = load_png(&path)?.modcrop(scale);
            if hr.height() < need || hr.width() < need {
                eprintln!(
                    "warning: skipping {} ({}x{} smaller than the {need}x{need} patch)",
                    path.display(),
                    hr.height(),
                    hr.width()
                );
                continue;
            }
            images.push((name, hr));
        }
        if images.is_empty() {
            return Err(Error::invalid(
                "TrainSet",
                format!(
                    "{}: every image is smaller than the {need}x{need} ground-truth patch",
                    manifest.display()
                ),
            ));
        }
        Ok(TrainSet { images })
    }
}

/// Cut one aligned patch triple out of an HR image: the ground-truth patch
/// (side `patch_size * r`) at a top-left offset divisible by `r`, its
/// bicubic downscale (side `patch_size`), and the bicubic re-upscale of that
/// downscale. The model learns to map (lr, ilr) back to hr.
pub fn sample_patch<R: Rng>(
    hr: &ImageBuffer,
    r: usize,
    patch_size: usize,
    rng: &mut R,
) -> Result<(ImageBuffer, ImageBuffer, ImageBuffer)> {
    let side = patch_size * r;
    if hr.height() < side || hr.width() < side {
        return Err(Error::invalid(
            "sample_patch",
            format!("image {}x{} smaller than patch {side}x{side}", hr.height(), hr.width()),
        ));
    }
    // Offsets on the r-grid so the patch's LR view aligns with whole LR pixels.
    let oy = rng.gen_range(0..=(hr.height() - side) / r) * r;
    let ox = rng.gen_range(0..=(hr.width() - side) / r) * r;
    let hr_patch = crop_at(hr, oy, ox, side, side);
    let lr_patch = resize_bicubic(&hr_patch, patch_size, patch_size)?.clamp01();
    let ilr_patch = resize_bicubic(&lr_patch, side, side)?.clamp01();
    Ok((lr_patch, ilr_patch, hr_patch))
}

fn crop_at(img: &ImageBuffer, oy: usize, ox: usize, h: usize, w: usize) -> ImageBuffer {
    let mut data = Vec::with_capacity(img.channels() * h * w);
    for c in 0..img.channels() {
        let p = img.plane(c);
        for y in 0..h {
            let row = (oy + y) * img.width() + ox;
            data.extend_from_slice(&p[row..row + w]);
        }
    }
    ImageBuffer::new(img.channels(), h, w, data).expect("crop extents validated")
}

/// Apply dihedral transform `k` in 0..8: bit 2 = horizontal flip (applied
/// first), bits 0-1 = number of 90-degree counterclockwise rotations.
pub fn dihedral(img: &ImageBuffer, k: u8) -> ImageBuffer {
    assert!(k < 8, "dihedral index out of range");
    let mut out = img.clone();
    if k & 4 != 0 {
        out = flip_h(&out);
    }
    for _ in 0..(k & 3) {
        out = rot90(&out);
    }
    out
}

fn flip_h(img: &ImageBuffer) -> ImageBuffer {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let mut data = vec![0.0f32; c * h * w];
    for ci in 0..c {
        let src = img.plane(ci);
        for y in 0..h {
            for x in 0..w {
                data[(ci * h + y) * w + x] = src[y * w + (w - 1 - x)];
            }
        }
    }
    ImageBuffer::new(c, h, w, data).expect("same extents")
}

/// Counterclockwise quarter turn: `out[y][x] = in[x][w_in - 1 - y]` with
/// swapped extents.
fn rot90(img: &ImageBuffer) -> ImageBuffer {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let (oh, ow) = (w, h);
    let mut data = vec![0.0f32; c * oh * ow];
    for ci in 0..c {
        let src = img.plane(ci);
        for y in 0..oh {
            for x in 0..ow {
                data[(ci * oh + y) * ow + x] = src[x * w + (w - 1 - y)];
            }
        }
    }
    ImageBuffer::new(c, oh, ow, data).expect("swapped extents")
}

/// Draw one of the eight dihedral transforms and apply the SAME transform to
/// all three patches, preserving their pixel correspondence.
pub fn augment<R: Rng>(
    lr: &ImageBuffer,
    ilr: &ImageBuffer,
    hr: &ImageBuffer,
    rng: &mut R,
) -> (ImageBuffer, ImageBuffer, ImageBuffer) {
    let k = rng.gen_range(0..8u8);
    (dihedral(lr, k), dihedral(ilr, k), dihedral(hr, k))
}

/// Stack same-shaped images into one `[n, c, h, w]` tensor.
pub fn stack_images(imgs: &[ImageBuffer]) -> Tensor<f32> {
    assert!(!imgs.is_empty(), "stack_images: empty batch");
    let (c, h, w) = (imgs[0].channels(), imgs[0].height(), imgs[0].width());
    let mut data = Vec::with_capacity(imgs.len() * c * h * w);
    for img in imgs {
        assert!(
            img.channels() == c && img.height() == h && img.width() == w,
            "stack_images: mismatched shapes"
        );
        data.extend_from_slice(img.data());
    }
    Tensor::new(&[imgs.len(), c, h, w], data).expect("stacked extents")
}
