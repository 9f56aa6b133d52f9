//! 2x2 max pooling with stride 2.

use crate::tensor::{Graph, Scalar, Tensor};
use crate::{Error, Result};

/// Max-pool `x: [n, c, h, w]` over non-overlapping 2x2 windows.
///
/// `h` and `w` must be even (callers arrange their spatial sizes so this
/// holds; anything else is a hard error, not silent truncation). On ties the
/// gradient goes to the first maximal element in row-major window order.
pub fn maxpool2x2<T: Scalar>(g: &Graph<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::shape(
            "maxpool2x2",
            format!("expected [n, c, h, w], got {s:?}"),
        ));
    }
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(
            "maxpool2x2",
            format!("spatial dims must be even, got {h}x{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = vec![T::ZERO; n * c * oh * ow];
    // Flat input index of each window's winner, for the backward scatter.
    let mut argmax = vec![0u32; out.len()];
    for nc in 0..n * c {
        let base = nc * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i00 = base + (2 * oy) * w + 2 * ox;
                // Row-major window order (0,0), (0,1), (1,0), (1,1); strict
                // comparison keeps the first occurrence on ties.
                let mut best_i = i00;
                let mut best_v = xd[i00];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if xd[i] > best_v {
                        best_v = xd[i];
                        best_i = i;
                    }
                }
                let o = nc * oh * ow + oy * ow + ox;
                out[o] = best_v;
                argmax[o] = best_i as u32;
            }
        }
    }
    let out = Tensor::new(&[n, c, oh, ow], out)?;
    if g.enabled() {
        let px = x.clone();
        g.record(&out, move |go| {
            let mut dx = vec![T::ZERO; px.len()];
            for (o, &src) in argmax.iter().enumerate() {
                dx[src as usize] += go[o];
            }
            px.accumulate_grad(&dx);
        });
    }
    Ok(out)
}
