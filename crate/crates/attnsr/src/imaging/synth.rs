//! Seeded synthetic texture images and a tiny on-disk corpus builder.
//!
//! The images combine smooth gradients, solid rectangles and disks (sharp
//! edges), and moderate-frequency gratings — content whose bicubic upscale
//! is visibly soft, so even a small model can learn a measurable sharpening
//! improvement. They are noise-free and fully determined by the seed.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{save_png, ImageBuffer};
use crate::{Error, Result};

/// Renders one deterministic RGB texture image.
pub fn synthetic_texture(height: usize, width: usize, seed: u64) -> ImageBuffer {
    assert!(height > 0 && width > 0, "synthetic_texture: empty image");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = height * width;
    let mut data = vec![0.0f32; 3 * plane];

    // Background: bilinear blend of four random corner colors.
    let corners: [[f32; 3]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(0.1..0.9)));
    for y in 0..height {
        let v = y as f32 / (height.max(2) - 1) as f32;
        for x in 0..width {
            let u = x as f32 / (width.max(2) - 1) as f32;
            for c in 0..3 {
                let top = corners[0][c] * (1.0 - u) + corners[1][c] * u;
                let bottom = corners[2][c] * (1.0 - u) + corners[3][c] * u;
                data[c * plane + y * width + x] = top * (1.0 - v) + bottom * v;
            }
        }
    }

    // A couple of sinusoidal grating bands, period >= 4 px so the pattern
    // survives a 2x antialiased downscale.
    for _ in 0..rng.gen_range(1..=2) {
        let period = rng.gen_range(4.0f32..10.0);
        let angle = rng.gen_range(0.0f32..std::f32::consts::PI);
        let (dy, dx) = (angle.sin(), angle.cos());
        let amp = rng.gen_range(0.15f32..0.3);
        let y0 = rng.gen_range(0..height);
        let x0 = rng.gen_range(0..width);
        let bh = (height / 2).max(1);
        let bw = (width / 2).max(1);
        for y in y0..(y0 + bh).min(height) {
            for x in x0..(x0 + bw).min(width) {
                let phase = (y as f32 * dy + x as f32 * dx) * std::f32::consts::TAU / period;
                let delta = amp * phase.sin();
                for c in 0..3 {
                    let px = &mut data[c * plane + y * width + x];
                    *px = (*px + delta).clamp(0.0, 1.0);
                }
            }
        }
    }

    // Solid rectangles: hard horizontal and vertical edges. Many small
    // shapes give a far higher edge density than a few large ones, and
    // edges are exactly where interpolation loses the most.
    for _ in 0..rng.gen_range(6..=10) {
        let rh = rng.gen_range((height / 10).max(2)..=(height / 4).max(2));
        let rw = rng.gen_range((width / 10).max(2)..=(width / 4).max(2));
        let y0 = rng.gen_range(0..height.saturating_sub(rh).max(1));
        let x0 = rng.gen_range(0..width.saturating_sub(rw).max(1));
        let color: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        for y in y0..(y0 + rh).min(height) {
            for x in x0..(x0 + rw).min(width) {
                for c in 0..3 {
                    data[c * plane + y * width + x] = color[c];
                }
            }
        }
    }

    // Solid disks: hard curved edges at every orientation.
    for _ in 0..rng.gen_range(3..=6) {
        let r = rng.gen_range((height.min(width) / 16).max(2)..=(height.min(width) / 7).max(3));
        let cy = rng.gen_range(0..height) as i64;
        let cx = rng.gen_range(0..width) as i64;
        let color: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let rr = (r * r) as i64;
        for y in (cy - r as i64).max(0)..(cy + r as i64 + 1).min(height as i64) {
            for x in (cx - r as i64).max(0)..(cx + r as i64 + 1).min(width as i64) {
                if (y - cy) * (y - cy) + (x - cx) * (x - cx) <= rr {
                    for c in 0..3 {
                        data[c * plane + y as usize * width + x as usize] = color[c];
                    }
                }
            }
        }
    }

    // Thin strokes at arbitrary angles (capsules 1-3 px wide). Their
    // downscaled trace is a faint blurred streak, so reconstructing the
    // crisp line is a strong, learnable reward signal.
    let side = height.min(width) as f32;
    for _ in 0..rng.gen_range(5..=9) {
        let half_w = rng.gen_range(1..=3) as f32 / 2.0;
        let len = rng.gen_range((side / 4.0).max(3.0)..=(side / 1.5).max(4.0));
        let theta = rng.gen_range(0.0f32..std::f32::consts::PI);
        let (dy, dx) = (theta.sin(), theta.cos());
        let cy = rng.gen_range(0..height) as f32;
        let cx = rng.gen_range(0..width) as f32;
        let color: [f32; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let (y0, x0) = (cy - dy * len / 2.0, cx - dx * len / 2.0);
        let (y1, x1) = (cy + dy * len / 2.0, cx + dx * len / 2.0);
        let (sy, sx) = (y1 - y0, x1 - x0);
        let norm2 = sy * sy + sx * sx;
        let lo_y = (y0.min(y1) - half_w).floor().max(0.0) as usize;
        let hi_y = (((y0.max(y1) + half_w).ceil()).max(0.0) as usize).min(height - 1);
        let lo_x = (x0.min(x1) - half_w).floor().max(0.0) as usize;
        let hi_x = (((x0.max(x1) + half_w).ceil()).max(0.0) as usize).min(width - 1);
        for y in lo_y..=hi_y {
            for x in lo_x..=hi_x {
                let (py, px) = (y as f32 - y0, x as f32 - x0);
                let t = ((py * sy + px * sx) / norm2).clamp(0.0, 1.0);
                let (ey, ex) = (py - t * sy, px - t * sx);
                if ey * ey + ex * ex <= half_w * half_w {
                    for c in 0..3 {
                        data[c * plane + y * width + x] = color[c];
                    }
                }
            }
        }
    }

    ImageBuffer::new(3, height, width, data).expect("synthetic_texture: internal shape error")
}

fn write_manifest(path: &Path, header: &str, names: &[String]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# {header}").unwrap();
    for name in names {
        writeln!(out, "{name}").unwrap();
    }
    std::fs::write(path, out).map_err(|source| Error::io(path, source))
}

/// Writes `n_train` + `n_val` seeded texture PNGs of extent `size`x`size`
/// under `dir/hr/`, plus `train.txt` / `val.txt` manifests listing them with
/// paths relative to the manifest location. Returns the two manifest paths.
pub fn write_toy_corpus(
    dir: &Path,
    n_train: usize,
    n_val: usize,
    size: usize,
    seed: u64,
) -> Result<(PathBuf, PathBuf)> {
    let hr_dir = dir.join("hr");
    std::fs::create_dir_all(&hr_dir).map_err(|source| Error::io(&hr_dir, source))?;
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);

    let render = |prefix: &str, count: usize, seeder: &mut ChaCha8Rng| -> Result<Vec<String>> {
        let mut names = Vec::with_capacity(count);
        for i in 0..count {
            let img = synthetic_texture(size, size, seeder.gen());
            let name = format!("hr/{prefix}_{i:03}.png");
            save_png(&dir.join(&name), &img)?;
            names.push(name);
        }
        Ok(names)
    };

    let train_names = render("train", n_train, &mut seeder)?;
    let val_names = render("val", n_val, &mut seeder)?;

    let train_manifest = dir.join("train.txt");
    let val_manifest = dir.join("val.txt");
    write_manifest(&train_manifest, "synthetic training images", &train_names)?;
    write_manifest(&val_manifest, "synthetic validation images", &val_names)?;
    Ok((train_manifest, val_manifest))
}
