//! Transposed convolution with a 2x2 kernel and stride 2 (exact 2x
//! upsampling).

use rand::Rng;

use super::{expect_nchw, xavier_uniform, Parameter};
use crate::tensor::{Graph, Scalar, Tensor};
use crate::{Error, Result};

/// Transposed convolution of `x: [n, in_c, h, w]` with
/// `weight: [in_c, out_c, 2, 2]` and `bias: [out_c]`, stride 2, producing
/// `[n, out_c, 2h, 2w]`.
///
/// Because the stride equals the kernel size, output blocks never overlap:
/// each input pixel paints one 2x2 output block,
///
/// ```text
/// out[n, co, 2y + ky, 2x + kx] = bias[co] + sum_ci x[n, ci, y, x] * w[ci, co, ky, kx]
/// ```
///
/// This op is the exact adjoint (up to bias) of a stride-2 2x2 convolution,
/// which is what makes it the standard decoder-side mirror of pooling.
pub fn conv2d_transposed<T: Scalar>(
    g: &Graph<T>,
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let ws = weight.shape();
    if ws.len() != 4 || ws[2] != 2 || ws[3] != 2 {
        return Err(Error::shape(
            "conv2d_transposed",
            format!("weight must be [in_c, out_c, 2, 2], got {ws:?}"),
        ));
    }
    let (in_c, out_c) = (ws[0], ws[1]);
    if bias.shape() != [out_c] {
        return Err(Error::shape(
            "conv2d_transposed",
            format!("bias must be [{out_c}], got {:?}", bias.shape()),
        ));
    }
    let (n, _, h, w) = expect_nchw("conv2d_transposed", x, in_c)?;
    let (oh, ow) = (2 * h, 2 * w);
    let plane = h * w;

    // One GEMM per sample: tmp[(co, ky, kx), (y, x)] = W^T @ x_n, then a
    // scatter interleaves the four kernel taps into the upsampled grid.
    let m = out_c * 4;
    let mut tmp = vec![T::ZERO; m * plane];
    let mut out = vec![T::ZERO; n * out_c * oh * ow];
    for ni in 0..n {
        let xn = &x.data()[ni * in_c * plane..(ni + 1) * in_c * plane];
        unsafe {
            T::gemm(
                m,
                in_c,
                plane,
                T::ONE,
                weight.data().as_ptr(),
                1, // transposed view of [in_c, m]
                m as isize,
                xn.as_ptr(),
                plane as isize,
                1,
                T::ZERO,
                tmp.as_mut_ptr(),
                plane as isize,
                1,
            );
        }
        let on = &mut out[ni * out_c * oh * ow..(ni + 1) * out_c * oh * ow];
        for co in 0..out_c {
            let bco = bias.data()[co];
            for ky in 0..2 {
                for kx in 0..2 {
                    let t = &tmp[((co * 2 + ky) * 2 + kx) * plane..][..plane];
                    for y in 0..h {
                        let orow = co * oh * ow + (2 * y + ky) * ow + kx;
                        for xcol in 0..w {
                            on[orow + 2 * xcol] = t[y * w + xcol] + bco;
                        }
                    }
                }
            }
        }
    }
    let out = Tensor::new(&[n, out_c, oh, ow], out)?;

    let (px, pw, pb) = (x.clone(), weight.clone(), bias.clone());
    g.record(&out, move |go| {
        let mut dx = vec![T::ZERO; px.len()];
        let mut dw = vec![T::ZERO; pw.len()];
        let mut db = vec![T::ZERO; out_c];
        let mut dtmp = vec![T::ZERO; m * plane];
        for ni in 0..n {
            // Gather the output gradient back into tap-major layout.
            let go_n = &go[ni * out_c * oh * ow..(ni + 1) * out_c * oh * ow];
            for co in 0..out_c {
                let mut acc = T::ZERO;
                for &v in &go_n[co * oh * ow..(co + 1) * oh * ow] {
                    acc += v;
                }
                db[co] += acc;
                for ky in 0..2 {
                    for kx in 0..2 {
                        let t = &mut dtmp[((co * 2 + ky) * 2 + kx) * plane..][..plane];
                        for y in 0..h {
                            let orow = co * oh * ow + (2 * y + ky) * ow + kx;
                            for xcol in 0..w {
                                t[y * w + xcol] = go_n[orow + 2 * xcol];
                            }
                        }
                    }
                }
            }
            let xn = &px.data()[ni * in_c * plane..(ni + 1) * in_c * plane];
            unsafe {
                // d x_n = W @ dtmp
                T::gemm(
                    in_c,
                    m,
                    plane,
                    T::ONE,
                    pw.data().as_ptr(),
                    m as isize,
                    1,
                    dtmp.as_ptr(),
                    plane as isize,
                    1,
                    T::ZERO,
                    dx[ni * in_c * plane..(ni + 1) * in_c * plane].as_mut_ptr(),
                    plane as isize,
                    1,
                );
                // d W += x_n @ dtmp^T
                T::gemm(
                    in_c,
                    plane,
                    m,
                    T::ONE,
                    xn.as_ptr(),
                    plane as isize,
                    1,
                    dtmp.as_ptr(),
                    1, // transposed view of [m, plane]
                    plane as isize,
                    T::ONE,
                    dw.as_mut_ptr(),
                    m as isize,
                    1,
                );
            }
        }
        px.accumulate_grad(&dx);
        pw.accumulate_grad(&dw);
        pb.accumulate_grad(&db);
    });
    Ok(out)
}

/// 2x upsampling layer (transposed conv, 2x2 kernel, stride 2) with
/// Xavier-uniform weights and zero bias.
pub struct ConvTranspose2d<T: Scalar> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn new<R: Rng>(in_c: usize, out_c: usize, rng: &mut R) -> Self {
        let weight = xavier_uniform(&[in_c, out_c, 2, 2], in_c * 4, out_c * 4, rng);
        ConvTranspose2d {
            weight: Parameter::new(weight),
            bias: Parameter::new(Tensor::zeros(&[out_c])),
        }
    }

    pub fn forward(&self, g: &Graph<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d_transposed(g, x, &self.weight.tensor(), &self.bias.tensor())
    }
}
