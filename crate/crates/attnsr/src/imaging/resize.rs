//! Bicubic resampling in the classic reference-tool convention.
//!
//! Three ingredients make resampled values match the numbers SR papers
//! report: the Keys kernel with a = -0.5, half-pixel symmetric coordinate
//! mapping, and — on downscale — widening the kernel by the scale factor
//! (antialiasing). Weights are renormalized per output sample and
//! out-of-range taps clamp to the edge.

use super::ImageBuffer;
use crate::{Error, Result};

/// The Keys bicubic kernel with a = -0.5:
///
/// ```text
/// |x| <= 1:      1.5|x|^3 - 2.5|x|^2 + 1
/// 1 < |x| < 2:  -0.5|x|^3 + 2.5|x|^2 - 4|x| + 2
/// otherwise:     0
/// ```
///
/// At half phase the four live taps are `[-0.0625, 0.5625, 0.5625, -0.0625]`.
pub fn bicubic_kernel(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        (1.5 * a - 2.5) * a * a + 1.0
    } else if a < 2.0 {
        ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    } else {
        0.0
    }
}

/// Per-axis resampling plan: for output sample `i`, taps
/// `indices[i*taps..(i+1)*taps]` weighted by the matching `weights` range.
struct AxisPlan {
    taps: usize,
    indices: Vec<u32>,
    weights: Vec<f64>,
}

/// Build the tap/weight table for one axis.
///
/// `u = (i + 0.5) / scale - 0.5` maps output sample centers into input
/// coordinates. On downscale with `antialias`, the kernel is stretched by
/// `1/scale` (and compensated in amplitude), widening its support so the
/// input is low-passed. Weights are normalized to sum to 1 per output
/// sample; indices clamp at the borders.
fn axis_plan(in_len: usize, out_len: usize, antialias: bool) -> AxisPlan {
    let scale = out_len as f64 / in_len as f64;
    let kscale = if antialias && scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / kscale;
    let taps = (2.0 * support).ceil() as usize + 2;
    let mut indices = vec![0u32; out_len * taps];
    let mut weights = vec![0.0f64; out_len * taps];
    for i in 0..out_len {
        let u = (i as f64 + 0.5) / scale - 0.5;
        let left = (u - support).floor() as i64 + 1;
        let mut wsum = 0.0;
        for t in 0..taps {
            let idx = left + t as i64;
            let w = kscale * bicubic_kernel(kscale * (u - idx as f64));
            weights[i * taps + t] = w;
            wsum += w;
            indices[i * taps + t] = idx.clamp(0, in_len as i64 - 1) as u32;
        }
        for t in 0..taps {
            weights[i * taps + t] /= wsum;
        }
    }
    AxisPlan {
        taps,
        indices,
        weights,
    }
}

/// Resample one plane horizontally: `[h, w_in] -> [h, w_out]` (f64 working
/// precision).
fn apply_rows(src: &[f64], h: usize, w_in: usize, plan: &AxisPlan, w_out: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; h * w_out];
    for y in 0..h {
        let row = &src[y * w_in..(y + 1) * w_in];
        for x in 0..w_out {
            let mut acc = 0.0;
            for t in 0..plan.taps {
                acc += plan.weights[x * plan.taps + t]
                    * row[plan.indices[x * plan.taps + t] as usize];
            }
            out[y * w_out + x] = acc;
        }
    }
    out
}

/// Resample one plane vertically: `[h_in, w] -> [h_out, w]`.
fn apply_cols(src: &[f64], _h_in: usize, w: usize, plan: &AxisPlan, h_out: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; h_out * w];
    for y in 0..h_out {
        let dst = &mut out[y * w..(y + 1) * w];
        for t in 0..plan.taps {
            let wgt = plan.weights[y * plan.taps + t];
            let srow = plan.indices[y * plan.taps + t] as usize;
            let src_row = &src[srow * w..(srow + 1) * w];
            for x in 0..w {
                dst[x] += wgt * src_row[x];
            }
        }
    }
    out
}

/// Bicubic resize with antialiasing on downscale (the evaluation-grade
/// default). Output values are NOT clamped; exports clamp.
pub fn resize_bicubic(img: &ImageBuffer, out_h: usize, out_w: usize) -> Result<ImageBuffer> {
    resize_bicubic_custom(img, out_h, out_w, true)
}

/// Bicubic resize with an explicit antialiasing choice (`antialias` only
/// affects axes that shrink).
pub fn resize_bicubic_custom(
    img: &ImageBuffer,
    out_h: usize,
    out_w: usize,
    antialias: bool,
) -> Result<ImageBuffer> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(
            "resize_bicubic",
            format!("target {out_h}x{out_w} must be positive"),
        ));
    }
    let (h, w) = (img.height(), img.width());
    let hplan = axis_plan(w, out_w, antialias);
    let vplan = axis_plan(h, out_h, antialias);
    let mut data = Vec::with_capacity(img.channels() * out_h * out_w);
    for c in 0..img.channels() {
        let plane: Vec<f64> = img.plane(c).iter().map(|&v| v as f64).collect();
        let rows = apply_rows(&plane, h, w, &hplan, out_w);
        let cols = apply_cols(&rows, h, out_w, &vplan, out_h);
        data.extend(cols.iter().map(|&v| v as f32));
    }
    ImageBuffer::new(img.channels(), out_h, out_w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_anchors() {
        assert_eq!(bicubic_kernel(0.0), 1.0);
        assert_eq!(bicubic_kernel(1.0), 0.0);
        assert_eq!(bicubic_kernel(2.0), 0.0);
        assert_eq!(bicubic_kernel(0.5), 0.5625);
        assert_eq!(bicubic_kernel(1.5), -0.0625);
        assert_eq!(bicubic_kernel(-0.5), 0.5625);
    }

    #[test]
    fn half_phase_weights() {
        // Downscaling 2:1 without antialias puts every output sample exactly
        // between two inputs; the four live taps must be the classic
        // half-phase quad and they already sum to 1.
        let plan = axis_plan(8, 4, false);
        let w = &plan.weights[..plan.taps];
        let nonzero: Vec<f64> = w.iter().cloned().filter(|v| v.abs() > 1e-12).collect();
        assert_eq!(nonzero, vec![-0.0625, 0.5625, 0.5625, -0.0625]);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_images_stay_constant() {
        let img = ImageBuffer::filled(3, 7, 5, 0.4375);
        for (oh, ow) in [(14, 10), (3, 2), (7, 5), (25, 4)] {
            let r = resize_bicubic(&img, oh, ow).unwrap();
            assert_eq!((r.height(), r.width()), (oh, ow));
            for &v in r.data() {
                assert!((v - 0.4375).abs() < 1e-6, "constant broken: {v}");
            }
        }
    }

    #[test]
    fn linear_ramp_survives_down_up_roundtrip() {
        // Linear in both axes; cubic interpolation reproduces polynomials of
        // degree <= 1 exactly, so interior samples must come back unchanged.
        // The margin of 8 keeps clear of edge-clamp contamination, which the
        // widened antialias kernel spreads about 5 pixels inward here.
        let (h, w) = (32, 32);
        let data: Vec<f32> = (0..h * w)
            .map(|i| {
                let (y, x) = (i / w, i % w);
                (x as f32 + 2.0 * y as f32) / (3.0 * w as f32)
            })
            .collect();
        let img = ImageBuffer::new(1, h, w, data).unwrap();
        let down = resize_bicubic(&img, h / 2, w / 2).unwrap();
        let up = resize_bicubic(&down, h, w).unwrap();
        for y in 8..h - 8 {
            for x in 8..w - 8 {
                let err = (up.get(0, y, x) - img.get(0, y, x)).abs();
                assert!(err < 1e-6, "({y},{x}): {err}");
            }
        }
    }

    #[test]
    fn zero_target_is_rejected() {
        let img = ImageBuffer::filled(1, 4, 4, 0.0);
        assert!(resize_bicubic(&img, 0, 4).is_err());
        assert!(resize_bicubic(&img, 4, 0).is_err());
    }
}
