//! Shared helpers for the integration suites: naive nested-loop oracles
//! (deliberately written as direct transcriptions of the defining equations,
//! with none of the library's im2col/permutation machinery) and small
//! random-instance generators.

#![allow(dead_code)]

use attnsr::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor_f32(rng: &mut ChaCha8Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor<f32> {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

/// `|got - want| <= tol * max(1, |want|)` for every element.
pub fn assert_close(label: &str, got: &[f32], want: &[f32], tol: f32) {
    assert_eq!(got.len(), want.len(), "{label}: length mismatch");
    for (i, (&g, &w)) in got.iter().zip(want).enumerate() {
        let bound = tol * w.abs().max(1.0);
        assert!(
            (g - w).abs() <= bound,
            "{label}: element {i}: got {g}, want {w} (tol {bound:e})"
        );
    }
}

/// Direct six-loop convolution: cross-correlation with zero padding,
/// stride 1. `x: [n, in_c, h, w]`, `w: [out_c, in_c, k, k]`, `b: [out_c]`.
pub fn naive_conv2d(
    x: &[f32],
    (n, in_c, h, w): (usize, usize, usize, usize),
    weight: &[f32],
    (out_c, k): (usize, usize),
    bias: &[f32],
    pad: usize,
) -> Vec<f32> {
    let oh = h + 2 * pad - (k - 1);
    let ow = w + 2 * pad - (k - 1);
    let mut out = vec![0.0f32; n * out_c * oh * ow];
    for ni in 0..n {
        for oc in 0..out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[oc];
                    for ic in 0..in_c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy + ky) as isize - pad as isize;
                                let ix = (ox + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xv = x[((ni * in_c + ic) * h + iy as usize) * w + ix as usize];
                                let wv = weight[((oc * in_c + ic) * k + ky) * k + kx];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[((ni * out_c + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

/// 2x2 max pooling with stride 2 on even extents.
pub fn naive_maxpool2x2(x: &[f32], (n, c, h, w): (usize, usize, usize, usize)) -> Vec<f32> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0f32; n * c * oh * ow];
    for ni in 0..n {
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let v = x[((ni * c + ci) * h + 2 * oy + dy) * w + 2 * ox + dx];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    out[((ni * c + ci) * oh + oy) * ow + ox] = best;
                }
            }
        }
    }
    out
}

/// Depth-to-space, scattering each input element to its sub-pixel slot:
/// channel `cu*r^2 + dy*r + dx` feeds output pixel `(y*r + dy, x*r + dx)`
/// of channel `cu`.
pub fn naive_pixel_shuffle(
    x: &[f32],
    (n, c, h, w): (usize, usize, usize, usize),
    r: usize,
) -> Vec<f32> {
    let co = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![0.0f32; n * co * oh * ow];
    for ni in 0..n {
        for ci in 0..c {
            let cu = ci / (r * r);
            let (dy, dx) = ((ci % (r * r)) / r, ci % r);
            for y in 0..h {
                for x_ in 0..w {
                    out[((ni * co + cu) * oh + (y * r + dy)) * ow + (x_ * r + dx)] =
                        x[((ni * c + ci) * h + y) * w + x_];
                }
            }
        }
    }
    out
}

/// `hr = f * m + ilr` with the single-channel mask reused for every channel.
pub fn naive_compose(
    f: &[f32],
    m: &[f32],
    ilr: &[f32],
    (n, c, h, w): (usize, usize, usize, usize),
) -> Vec<f32> {
    let plane = h * w;
    let mut out = vec![0.0f32; n * c * plane];
    for ni in 0..n {
        for ci in 0..c {
            for p in 0..plane {
                let i = (ni * c + ci) * plane + p;
                out[i] = f[i] * m[ni * plane + p] + ilr[i];
            }
        }
    }
    out
}
