//! 2-D convolution (cross-correlation), stride 1, symmetric zero padding.
//!
//! The forward pass lowers each sample to an im2col matrix and runs one GEMM
//! per sample. The backward pass recomputes the im2col matrix instead of
//! caching it: the recompute costs a fraction of the GEMM time and keeps the
//! tape's memory footprint at one activation per op rather than one
//! activation plus a `k*k`-times-larger scratch matrix.

use rand::Rng;

use super::{expect_nchw, xavier_uniform, Parameter};
use crate::tensor::{Graph, Scalar, Tensor};
use crate::{Error, Result};

/// Unfold one `[c, h, w]` sample into a `[c*k*k, out_h*out_w]` matrix.
///
/// Row `(c*k + ki)*k + kj`, column `oy*out_w + ox` holds
/// `x[c, oy + ki - pad, ox + kj - pad]`, with zeros outside the image. For
/// each row the in-bounds span of a given `oy` is one contiguous slice of
/// the input row, so the inner loop is a `copy_from_slice`.
fn im2col<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    cols: &mut [T],
) {
    let out_h = h + 2 * pad - k + 1;
    let out_w = w + 2 * pad - k + 1;
    debug_assert_eq!(cols.len(), c * k * k * out_h * out_w);
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * out_h * out_w;
                for oy in 0..out_h {
                    let iy = (oy + ki) as isize - pad as isize;
                    let dst = &mut cols[row + oy * out_w..row + (oy + 1) * out_w];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::ZERO);
                        continue;
                    }
                    // ix = ox + kj - pad for ox in 0..out_w; clip to [0, w).
                    let shift = kj as isize - pad as isize;
                    let ox_lo = (-shift).max(0) as usize;
                    let ox_hi = ((w as isize - shift).min(out_w as isize)).max(0) as usize;
                    dst[..ox_lo].fill(T::ZERO);
                    dst[ox_hi..].fill(T::ZERO);
                    if ox_lo < ox_hi {
                        let src_row = ci * h * w + iy as usize * w;
                        let src_lo = (ox_lo as isize + shift) as usize;
                        dst[ox_lo..ox_hi].copy_from_slice(
                            &x[src_row + src_lo..src_row + src_lo + (ox_hi - ox_lo)],
                        );
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: fold a `[c*k*k, out_h*out_w]` matrix back onto a
/// `[c, h, w]` image, *accumulating* overlapping contributions.
fn col2im<T: Scalar>(
    cols: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    pad: usize,
    x: &mut [T],
) {
    let out_h = h + 2 * pad - k + 1;
    let out_w = w + 2 * pad - k + 1;
    for ci in 0..c {
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * out_h * out_w;
                for oy in 0..out_h {
                    let iy = (oy + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let shift = kj as isize - pad as isize;
                    let ox_lo = (-shift).max(0) as usize;
                    let ox_hi = ((w as isize - shift).min(out_w as isize)).max(0) as usize;
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let src = &cols[row + oy * out_w + ox_lo..row + oy * out_w + ox_hi];
                    let dst_row = ci * h * w + iy as usize * w;
                    let dst_lo = (ox_lo as isize + shift) as usize;
                    for (d, s) in x[dst_row + dst_lo..dst_row + dst_lo + src.len()]
                        .iter_mut()
                        .zip(src)
                    {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// Convolution of `x: [n, in_c, h, w]` with `weight: [out_c, in_c, k, k]`
/// and `bias: [out_c]`, stride 1, zero padding `pad` on every side.
///
/// Kernels are applied in cross-correlation orientation (no flip), matching
/// the usual deep-learning convention.
pub fn conv2d<T: Scalar>(
    g: &Graph<T>,
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    pad: usize,
) -> Result<Tensor<T>> {
    let ws = weight.shape();
    if ws.len() != 4 || ws[2] != ws[3] {
        return Err(Error::shape(
            "conv2d",
            format!("weight must be [out_c, in_c, k, k], got {ws:?}"),
        ));
    }
    let (out_c, in_c, k) = (ws[0], ws[1], ws[2]);
    if bias.shape() != [out_c] {
        return Err(Error::shape(
            "conv2d",
            format!("bias must be [{out_c}], got {:?}", bias.shape()),
        ));
    }
    let (n, _, h, w) = expect_nchw("conv2d", x, in_c)?;
    let (oh, ow) = (
        (h + 2 * pad).checked_sub(k - 1),
        (w + 2 * pad).checked_sub(k - 1),
    );
    let (oh, ow) = match (oh, ow) {
        (Some(oh), Some(ow)) if oh > 0 && ow > 0 => (oh, ow),
        _ => {
            return Err(Error::shape(
                "conv2d",
                format!("kernel {k} with pad {pad} does not fit input {h}x{w}"),
            ))
        }
    };

    let kdim = in_c * k * k; // GEMM inner dimension
    let plane = oh * ow;
    let mut cols = vec![T::ZERO; kdim * plane];
    let mut out = vec![T::ZERO; n * out_c * plane];
    for ni in 0..n {
        im2col(
            &x.data()[ni * in_c * h * w..(ni + 1) * in_c * h * w],
            in_c,
            h,
            w,
            k,
            pad,
            &mut cols,
        );
        let o = &mut out[ni * out_c * plane..(ni + 1) * out_c * plane];
        unsafe {
            T::gemm(
                out_c,
                kdim,
                plane,
                T::ONE,
                weight.data().as_ptr(),
                kdim as isize,
                1,
                cols.as_ptr(),
                plane as isize,
                1,
                T::ZERO,
                o.as_mut_ptr(),
                plane as isize,
                1,
            );
        }
        for m in 0..out_c {
            let bm = bias.data()[m];
            for v in &mut o[m * plane..(m + 1) * plane] {
                *v += bm;
            }
        }
    }
    let out = Tensor::new(&[n, out_c, oh, ow], out)?;

    let (px, pw, pb) = (x.clone(), weight.clone(), bias.clone());
    g.record(&out, move |go| {
        let mut dx = vec![T::ZERO; px.len()];
        let mut dw = vec![T::ZERO; pw.len()];
        let mut db = vec![T::ZERO; out_c];
        let mut cols = vec![T::ZERO; kdim * plane];
        let mut dcols = vec![T::ZERO; kdim * plane];
        for ni in 0..n {
            let go_n = &go[ni * out_c * plane..(ni + 1) * out_c * plane];
            // d x: fold W^T @ dOut back through the unfolding.
            unsafe {
                T::gemm(
                    kdim,
                    out_c,
                    plane,
                    T::ONE,
                    pw.data().as_ptr(),
                    1, // transposed view of [out_c, kdim]
                    kdim as isize,
                    go_n.as_ptr(),
                    plane as isize,
                    1,
                    T::ZERO,
                    dcols.as_mut_ptr(),
                    plane as isize,
                    1,
                );
            }
            col2im(
                &dcols,
                in_c,
                h,
                w,
                k,
                pad,
                &mut dx[ni * in_c * h * w..(ni + 1) * in_c * h * w],
            );
            // d weight: dOut @ cols^T, accumulated across samples in a fixed
            // order so results do not depend on scheduling.
            im2col(
                &px.data()[ni * in_c * h * w..(ni + 1) * in_c * h * w],
                in_c,
                h,
                w,
                k,
                pad,
                &mut cols,
            );
            unsafe {
                T::gemm(
                    out_c,
                    plane,
                    kdim,
                    T::ONE,
                    go_n.as_ptr(),
                    plane as isize,
                    1,
                    cols.as_ptr(),
                    1, // transposed view of [kdim, plane]
                    plane as isize,
                    T::ONE,
                    dw.as_mut_ptr(),
                    kdim as isize,
                    1,
                );
            }
            for m in 0..out_c {
                let mut acc = T::ZERO;
                for &v in &go_n[m * plane..(m + 1) * plane] {
                    acc += v;
                }
                db[m] += acc;
            }
        }
        px.accumulate_grad(&dx);
        pw.accumulate_grad(&dw);
        pb.accumulate_grad(&db);
    });
    Ok(out)
}

/// Stride-1 convolution layer with Xavier-uniform weights and zero bias.
pub struct Conv2d<T: Scalar> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pad: usize,
}

impl<T: Scalar> Conv2d<T> {
    /// `k` is the square kernel side; `pad` the symmetric zero padding
    /// (use `k / 2` to preserve spatial size for odd `k`).
    pub fn new<R: Rng>(in_c: usize, out_c: usize, k: usize, pad: usize, rng: &mut R) -> Self {
        let weight = xavier_uniform(&[out_c, in_c, k, k], in_c * k * k, out_c * k * k, rng);
        Conv2d {
            weight: Parameter::new(weight),
            bias: Parameter::new(Tensor::zeros(&[out_c])),
            pad,
        }
    }

    pub fn forward(&self, g: &Graph<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(g, x, &self.weight.tensor(), &self.bias.tensor(), self.pad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, sum};

    #[test]
    fn identity_kernel_passes_input_through() {
        let g = Graph::<f64>::disabled();
        let x = Tensor::new(&[1, 1, 3, 3], (1..=9).map(|v| v as f64).collect()).unwrap();
        // 3x3 kernel with a single 1 at the center, pad 1 => identity.
        let mut wdata = vec![0.0; 9];
        wdata[4] = 1.0;
        let w = Tensor::new(&[1, 1, 3, 3], wdata).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&g, &x, &w, &b, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn hand_computed_2x2_valid_conv() {
        let g = Graph::<f64>::disabled();
        // x = [[1, 2], [3, 4]], kernel = [[10, 20], [30, 40]], no padding.
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor::new(&[1, 1, 2, 2], vec![10.0, 20.0, 30.0, 40.0]).unwrap();
        let b = Tensor::new(&[1], vec![0.5]).unwrap();
        let y = conv2d(&g, &x, &w, &b, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        // 1*10 + 2*20 + 3*30 + 4*40 + 0.5 = 300.5 (cross-correlation, no flip)
        assert_eq!(y.data(), &[300.5]);
    }

    #[test]
    fn orientation_is_cross_correlation() {
        let g = Graph::<f64>::disabled();
        // Asymmetric kernel [[0,1],[0,0]] over [[1,2],[3,4]] valid:
        // cross-correlation picks x[0,1] = 2; a flipped (true convolution)
        // kernel would pick x[1,0] = 3.
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Tensor::new(&[1, 1, 2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&g, &x, &w, &b, 0).unwrap();
        assert_eq!(y.data(), &[2.0]);
    }

    #[test]
    fn shape_errors() {
        let g = Graph::<f64>::disabled();
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let w = Tensor::zeros(&[3, 2, 3, 3]);
        let b3 = Tensor::zeros(&[3]);
        assert!(conv2d(&g, &x, &w, &b3, 1).is_ok());
        // Wrong input channel count.
        let x1 = Tensor::zeros(&[1, 1, 4, 4]);
        assert!(conv2d(&g, &x1, &w, &b3, 1).is_err());
        // Wrong bias length.
        let b2 = Tensor::zeros(&[2]);
        assert!(conv2d(&g, &x, &w, &b2, 1).is_err());
        // Kernel larger than padded input.
        let tiny = Tensor::zeros(&[1, 2, 1, 1]);
        assert!(conv2d(&g, &tiny, &w, &b3, 0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = Tensor::new(
            &[2, 2, 3, 3],
            (0..36).map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0).collect(),
        )
        .unwrap();
        let w = Tensor::new(
            &[3, 2, 3, 3],
            (0..54).map(|i| ((i * 5 % 11) as f64 - 5.0) / 7.0).collect(),
        )
        .unwrap();
        let b = Tensor::new(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let report = grad_check(
            |g, xs| sum(g, &conv2d(g, &xs[0], &xs[1], &xs[2], 1).unwrap()),
            &[x, w, b],
            1e-6,
        );
        assert!(
            report.passes(1e-8),
            "max_rel_err = {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }
}
