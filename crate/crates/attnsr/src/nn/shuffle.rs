//! Sub-pixel rearrangement between channel depth and spatial resolution.

use crate::tensor::{Graph, Scalar, Tensor};
use crate::{Error, Result};

/// Depth-to-space permutation for `[n, c, h, w] -> [n, c / r^2, r*h, r*w]`.
fn shuffle_data<T: Scalar>(xd: &[T], n: usize, c: usize, h: usize, w: usize, r: usize) -> Vec<T> {
    let co = c / (r * r);
    let (oh, ow) = (r * h, r * w);
    let mut out = vec![T::ZERO; xd.len()];
    for ni in 0..n {
        for cu in 0..co {
            for y in 0..oh {
                let (iy, ry) = (y / r, y % r);
                for x in 0..ow {
                    let (ix, rx) = (x / r, x % r);
                    let ci = cu * r * r + ry * r + rx;
                    out[((ni * co + cu) * oh + y) * ow + x] =
                        xd[((ni * c + ci) * h + iy) * w + ix];
                }
            }
        }
    }
    out
}

/// Space-to-depth permutation for `[n, c, h, w] -> [n, c * r^2, h / r, w / r]`.
fn unshuffle_data<T: Scalar>(xd: &[T], n: usize, c: usize, h: usize, w: usize, r: usize) -> Vec<T> {
    let (ih, iw) = (h / r, w / r);
    let co = c * r * r;
    let mut out = vec![T::ZERO; xd.len()];
    for ni in 0..n {
        for cu in 0..c {
            for y in 0..h {
                let (oy, ry) = (y / r, y % r);
                for x in 0..w {
                    let (ox, rx) = (x / r, x % r);
                    let cc = cu * r * r + ry * r + rx;
                    out[((ni * co + cc) * ih + oy) * iw + ox] =
                        xd[((ni * c + cu) * h + y) * w + x];
                }
            }
        }
    }
    out
}

/// Rearrange `[n, c*r^2, h, w]` into `[n, c, r*h, r*w]`:
///
/// ```text
/// out[n, c, y, x] = in[n, c*r^2 + (y % r)*r + (x % r), y / r, x / r]
/// ```
///
/// Channels carry the sub-pixel phases in row-major `(dy, dx)` order, so a
/// convolution producing `c*r^2` channels followed by this op is the usual
/// sub-pixel upsampler.
pub fn pixel_shuffle<T: Scalar>(g: &Graph<T>, x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::shape(
            "pixel_shuffle",
            format!("expected [n, c, h, w], got {s:?}"),
        ));
    }
    if r == 0 || s[1] % (r * r) != 0 {
        return Err(Error::shape(
            "pixel_shuffle",
            format!("channels {} not divisible by r^2 = {}", s[1], r * r),
        ));
    }
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let out = Tensor::new(
        &[n, c / (r * r), r * h, r * w],
        shuffle_data(x.data(), n, c, h, w, r),
    )?;
    let px = x.clone();
    g.record(&out, move |go| {
        // A permutation's adjoint is its inverse permutation.
        px.accumulate_grad(&unshuffle_data(go, n, c / (r * r), r * h, r * w, r));
    });
    Ok(out)
}

/// Inverse of [`pixel_shuffle`]: `[n, c, h, w] -> [n, c*r^2, h/r, w/r]`
/// (spatial dims must divide by `r`).
pub fn pixel_unshuffle<T: Scalar>(g: &Graph<T>, x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::shape(
            "pixel_unshuffle",
            format!("expected [n, c, h, w], got {s:?}"),
        ));
    }
    if r == 0 || s[2] % r != 0 || s[3] % r != 0 {
        return Err(Error::shape(
            "pixel_unshuffle",
            format!("spatial dims {}x{} not divisible by r = {r}", s[2], s[3]),
        ));
    }
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let out = Tensor::new(
        &[n, c * r * r, h / r, w / r],
        unshuffle_data(x.data(), n, c, h, w, r),
    )?;
    let px = x.clone();
    g.record(&out, move |go| {
        px.accumulate_grad(&shuffle_data(go, n, c * r * r, h / r, w / r, r));
    });
    Ok(out)
}
