//! Peak signal-to-noise ratio and structural similarity on `[0, 1]` images.

use super::ImageBuffer;
use crate::{Error, Result};

fn check_same_extent(op: &'static str, a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.channels() != b.channels() || a.height() != b.height() || a.width() != b.width() {
        return Err(Error::invalid(
            op,
            format!(
                "{}x{}x{} vs {}x{}x{}",
                a.channels(),
                a.height(),
                a.width(),
                b.channels(),
                b.height(),
                b.width()
            ),
        ));
    }
    Ok(())
}

/// PSNR in decibels for unit dynamic range: `10 log10(1 / MSE)`.
///
/// Identical inputs give `+inf` (the distinguished zero-error sentinel);
/// callers that average must handle it explicitly.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_extent("psnr", a, b)?;
    let mut acc = 0.0f64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    let mse = acc / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// 11-tap Gaussian with sigma 1.5, normalized to sum 1. The separable outer
/// product of this vector with itself is the standard SSIM window.
fn gaussian11() -> [f64; 11] {
    let mut g = [0.0f64; 11];
    let sigma = 1.5f64;
    let mut sum = 0.0;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - 5.0;
        *v = (-d * d / (2.0 * sigma * sigma)).exp();
        sum += *v;
    }
    for v in &mut g {
        *v /= sum;
    }
    g
}

/// Valid-mode separable filtering with an 11-tap kernel: output extents
/// shrink by 10 in each axis.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64; 11]) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h - 10, w - 10);
    // Horizontal pass: [h, w] -> [h, ow].
    let mut tmp = vec![0.0f64; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * src[y * w + x + t];
            }
            tmp[y * ow + x] = acc;
        }
    }
    // Vertical pass: [h, ow] -> [oh, ow].
    let mut out = vec![0.0f64; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * tmp[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    (out, oh, ow)
}

/// Mean structural similarity over valid 11x11 Gaussian windows
/// (sigma = 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1).
///
/// Single-channel inputs of extent >= 11 required; symmetric in its
/// arguments; 1.0 exactly when the inputs are identical.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_same_extent("ssim", a, b)?;
    if a.channels() != 1 {
        return Err(Error::invalid("ssim", "expects single-channel (luma) images"));
    }
    let (h, w) = (a.height(), a.width());
    if h < 11 || w < 11 {
        return Err(Error::invalid(
            "ssim",
            format!("image {h}x{w} smaller than the 11x11 window"),
        ));
    }
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|&v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|&v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(&p, &q)| p * q).collect();

    let k = gaussian11();
    let (mu_x, oh, ow) = filter_valid(&x, h, w, &k);
    let (mu_y, _, _) = filter_valid(&y, h, w, &k);
    let (e_xx, _, _) = filter_valid(&xx, h, w, &k);
    let (e_yy, _, _) = filter_valid(&yy, h, w, &k);
    let (e_xy, _, _) = filter_valid(&xy, h, w, &k);

    const C1: f64 = 0.01 * 0.01; // (K1 * L)^2, L = 1
    const C2: f64 = 0.03 * 0.03; // (K2 * L)^2

    let mut acc = 0.0f64;
    for i in 0..oh * ow {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        acc += ((2.0 * mx * my + C1) * (2.0 * cov + C2))
            / ((mx * mx + my * my + C1) * (var_x + var_y + C2));
    }
    Ok(acc / (oh * ow) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy(seed: u64, h: usize, w: usize) -> ImageBuffer {
        // Small deterministic LCG texture; plenty for metric sanity checks.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let data: Vec<f32> = (0..h * w)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64 / (1u64 << 31) as f64) as f32
            })
            .collect();
        ImageBuffer::new(1, h, w, data).unwrap()
    }

    #[test]
    fn psnr_anchors() {
        let a = ImageBuffer::filled(1, 4, 4, 0.0);
        let b = ImageBuffer::filled(1, 4, 4, 1.0);
        assert_eq!(psnr(&a, &b).unwrap(), 0.0);
        assert!(psnr(&a, &a).unwrap().is_infinite());
        let half = ImageBuffer::filled(1, 4, 4, 0.5);
        assert!((psnr(&a, &half).unwrap() - 20.0 * 2.0f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn psnr_detects_constant_shift() {
        // psnr(a, a + delta) = -20 log10 |delta|, up to f32 rounding of the
        // per-pixel addition.
        let a = noisy(7, 12, 12);
        for delta in [0.25f32, 0.125, 0.0625] {
            let shifted =
                ImageBuffer::new(1, 12, 12, a.data().iter().map(|&v| v + delta).collect())
                    .unwrap();
            let want = -20.0 * (delta as f64).log10();
            let got = psnr(&a, &shifted).unwrap();
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn psnr_rejects_mismatched_shapes() {
        let a = ImageBuffer::filled(1, 4, 4, 0.0);
        let b = ImageBuffer::filled(1, 4, 5, 0.0);
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let a = noisy(1, 16, 20);
        let b = noisy(2, 16, 20);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab < 1.0 && ab > -1.0);
    }

    #[test]
    fn ssim_checks_preconditions() {
        let a = ImageBuffer::filled(1, 10, 16, 0.5);
        let b = ImageBuffer::filled(1, 10, 16, 0.5);
        assert!(ssim(&a, &b).is_err(), "height below window size");
        let c = ImageBuffer::filled(3, 16, 16, 0.5);
        assert!(ssim(&c, &c).is_err(), "multi-channel rejected");
    }

    #[test]
    fn ssim_degrades_with_noise_amplitude() {
        let a = noisy(3, 20, 20);
        let mild = ImageBuffer::new(
            1,
            20,
            20,
            a.data().iter().enumerate().map(|(i, &v)| v + if i % 2 == 0 { 0.02 } else { -0.02 }).collect(),
        )
        .unwrap();
        let harsh = ImageBuffer::new(
            1,
            20,
            20,
            a.data().iter().enumerate().map(|(i, &v)| v + if i % 2 == 0 { 0.2 } else { -0.2 }).collect(),
        )
        .unwrap();
        let s_mild = ssim(&a, &mild).unwrap();
        let s_harsh = ssim(&a, &harsh).unwrap();
        assert!(s_mild > s_harsh, "{s_mild} vs {s_harsh}");
    }
}
