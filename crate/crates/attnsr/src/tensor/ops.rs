//! Elementwise, reduction, and channel-concatenation ops.
//!
//! Each op computes its output eagerly and records a backward rule on the
//! graph. Rules capture cheap handles (`Tensor` clones) rather than copied
//! buffers wherever the math allows.

use super::{Graph, Scalar, Tensor};
use crate::{Error, Result};

/// How the second operand of a binary op lines up with the first.
///
/// Exactly two layouts are legal: identical shapes, or a single-channel `b`
/// spread across `a`'s channel axis (shapes `(..., c, h, w)` against
/// `(..., 1, h, w)` with everything else equal). The triple is
/// `(outer, channels, plane)`: `b` holds `outer * plane` values, one plane
/// per outer index, reused for every channel.
enum Align {
    Same,
    ChannelBroadcast {
        outer: usize,
        channels: usize,
        plane: usize,
    },
}

fn align<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<Align> {
    if a.shape() == b.shape() {
        return Ok(Align::Same);
    }
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() == sb.len() && sa.len() >= 3 {
        let c_axis = sa.len() - 3;
        let compatible = sb[c_axis] == 1
            && sa[..c_axis] == sb[..c_axis]
            && sa[c_axis + 1..] == sb[c_axis + 1..];
        if compatible {
            return Ok(Align::ChannelBroadcast {
                outer: sa[..c_axis].iter().product(),
                channels: sa[c_axis],
                plane: sa[c_axis + 1..].iter().product(),
            });
        }
    }
    Err(Error::shape(op, format!("{sa:?} vs {sb:?}")))
}

/// Elementwise `a + b`. Shapes must match, or `b` may be single-channel
/// against `a`'s channel axis (see [`mul`] for the broadcast rule).
pub fn add<T: Scalar>(g: &Graph<T>, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    match align("add", a, b)? {
        Align::Same => {
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect();
            let out = Tensor::new(a.shape(), data)?;
            let (pa, pb) = (a.clone(), b.clone());
            g.record(&out, move |go| {
                pa.accumulate_grad(go);
                pb.accumulate_grad(go);
            });
            Ok(out)
        }
        Align::ChannelBroadcast {
            outer,
            channels,
            plane,
        } => {
            let mut data = vec![T::ZERO; a.len()];
            broadcast_apply(a.data(), b.data(), &mut data, outer, channels, plane, |x, y| x + y);
            let out = Tensor::new(a.shape(), data)?;
            let (pa, pb) = (a.clone(), b.clone());
            g.record(&out, move |go| {
                pa.accumulate_grad(go);
                pb.accumulate_grad(&reduce_channels(go, outer, channels, plane));
            });
            Ok(out)
        }
    }
}

/// Elementwise `a - b` (identical shapes).
pub fn sub<T: Scalar>(g: &Graph<T>, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "sub",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x - y).collect();
    let out = Tensor::new(a.shape(), data)?;
    let (pa, pb) = (a.clone(), b.clone());
    g.record(&out, move |go| {
        pa.accumulate_grad(go);
        let neg: Vec<T> = go.iter().map(|&v| -v).collect();
        pb.accumulate_grad(&neg);
    });
    Ok(out)
}

/// Apply `f(a, b)` with `b` broadcast over the channel axis.
fn broadcast_apply<T: Scalar>(
    a: &[T],
    b: &[T],
    out: &mut [T],
    outer: usize,
    channels: usize,
    plane: usize,
    f: impl Fn(T, T) -> T,
) {
    for o in 0..outer {
        let bp = &b[o * plane..(o + 1) * plane];
        for c in 0..channels {
            let base = (o * channels + c) * plane;
            for i in 0..plane {
                out[base + i] = f(a[base + i], bp[i]);
            }
        }
    }
}

/// Sum a full-shape gradient over the channel axis, producing the gradient
/// of a channel-broadcast operand.
fn reduce_channels<T: Scalar>(go: &[T], outer: usize, channels: usize, plane: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; outer * plane];
    for o in 0..outer {
        for c in 0..channels {
            let base = (o * channels + c) * plane;
            for i in 0..plane {
                out[o * plane + i] += go[base + i];
            }
        }
    }
    out
}

/// Elementwise `a * b`.
///
/// Shapes must match exactly, or `b` may have a single channel against `a`'s
/// channel axis — `(n, c, h, w) * (n, 1, h, w)` or `(c, h, w) * (1, h, w)` —
/// in which case `b`'s plane multiplies every channel of `a` (the
/// mask-over-channels pattern). The broadcast operand's gradient sums over
/// the channels it was reused for.
pub fn mul<T: Scalar>(g: &Graph<T>, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    match align("mul", a, b)? {
        Align::Same => {
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
            let out = Tensor::new(a.shape(), data)?;
            let (pa, pb) = (a.clone(), b.clone());
            g.record(&out, move |go| {
                let da: Vec<T> = go.iter().zip(pb.data()).map(|(&g, &y)| g * y).collect();
                let db: Vec<T> = go.iter().zip(pa.data()).map(|(&g, &x)| g * x).collect();
                pa.accumulate_grad(&da);
                pb.accumulate_grad(&db);
            });
            Ok(out)
        }
        Align::ChannelBroadcast {
            outer,
            channels,
            plane,
        } => {
            let mut data = vec![T::ZERO; a.len()];
            broadcast_apply(a.data(), b.data(), &mut data, outer, channels, plane, |x, y| x * y);
            let out = Tensor::new(a.shape(), data)?;
            let (pa, pb) = (a.clone(), b.clone());
            g.record(&out, move |go| {
                let mut da = vec![T::ZERO; pa.len()];
                broadcast_apply(go, pb.data(), &mut da, outer, channels, plane, |g, y| g * y);
                let ga: Vec<T> = go.iter().zip(pa.data()).map(|(&g, &x)| g * x).collect();
                pa.accumulate_grad(&da);
                pb.accumulate_grad(&reduce_channels(&ga, outer, channels, plane));
            });
            Ok(out)
        }
    }
}

/// `x * c` for a compile-time-known constant `c`.
pub fn scale<T: Scalar>(g: &Graph<T>, x: &Tensor<T>, c: T) -> Tensor<T> {
    let data = x.data().iter().map(|&v| v * c).collect();
    let out = Tensor::new(x.shape(), data).expect("same shape as input");
    let px = x.clone();
    g.record(&out, move |go| {
        let dx: Vec<T> = go.iter().map(|&v| v * c).collect();
        px.accumulate_grad(&dx);
    });
    out
}

/// Rectified linear unit, `max(x, 0)`. The subgradient at 0 is 0.
pub fn relu<T: Scalar>(g: &Graph<T>, x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| v.max(T::ZERO)).collect();
    let out = Tensor::new(x.shape(), data).expect("same shape as input");
    let px = x.clone();
    g.record(&out, move |go| {
        let dx: Vec<T> = go
            .iter()
            .zip(px.data())
            .map(|(&g, &v)| if v > T::ZERO { g } else { T::ZERO })
            .collect();
        px.accumulate_grad(&dx);
    });
    out
}

/// Logistic sigmoid `1 / (1 + e^-x)`, saturated to stay *strictly* inside
/// `(0, 1)` even for inputs whose exact sigmoid would round to 0.0 or 1.0
/// in the working precision.
///
/// The backward rule reuses the forward output: `d sigma = sigma * (1 - sigma)`.
pub fn sigmoid<T: Scalar>(g: &Graph<T>, x: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .map(|&v| (T::ONE / (T::ONE + (-v).exp())).max(T::TINY).min(T::BELOW_ONE))
        .collect();
    let out = Tensor::new(x.shape(), data).expect("same shape as input");
    let px = x.clone();
    let pout = out.clone();
    g.record(&out, move |go| {
        let dx: Vec<T> = go
            .iter()
            .zip(pout.data())
            .map(|(&g, &s)| g * s * (T::ONE - s))
            .collect();
        px.accumulate_grad(&dx);
    });
    out
}

/// Elementwise absolute value. The subgradient at 0 is 0.
pub fn abs<T: Scalar>(g: &Graph<T>, x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| v.abs()).collect();
    let out = Tensor::new(x.shape(), data).expect("same shape as input");
    let px = x.clone();
    g.record(&out, move |go| {
        let dx: Vec<T> = go
            .iter()
            .zip(px.data())
            .map(|(&g, &v)| {
                if v > T::ZERO {
                    g
                } else if v < T::ZERO {
                    -g
                } else {
                    T::ZERO
                }
            })
            .collect();
        px.accumulate_grad(&dx);
    });
    out
}

/// Sum of all elements, as a `[1]` tensor.
pub fn sum<T: Scalar>(g: &Graph<T>, x: &Tensor<T>) -> Tensor<T> {
    let mut acc = T::ZERO;
    for &v in x.data() {
        acc += v;
    }
    let out = Tensor::scalar(acc);
    let px = x.clone();
    g.record(&out, move |go| {
        let dx = vec![go[0]; px.len()];
        px.accumulate_grad(&dx);
    });
    out
}

/// Mean of all elements, as a `[1]` tensor.
pub fn mean<T: Scalar>(g: &Graph<T>, x: &Tensor<T>) -> Tensor<T> {
    let inv = T::ONE / T::from_f64(x.len() as f64);
    let mut acc = T::ZERO;
    for &v in x.data() {
        acc += v;
    }
    let out = Tensor::scalar(acc * inv);
    let px = x.clone();
    g.record(&out, move |go| {
        let dx = vec![go[0] * inv; px.len()];
        px.accumulate_grad(&dx);
    });
    out
}

/// Concatenate `[n, c_i, h, w]` tensors along the channel axis.
pub fn concat_channels<T: Scalar>(g: &Graph<T>, parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    if parts.is_empty() {
        return Err(Error::invalid("concat_channels", "no inputs"));
    }
    let first = parts[0].shape();
    if first.len() != 4 {
        return Err(Error::shape(
            "concat_channels",
            format!("expected [n, c, h, w], got {first:?}"),
        ));
    }
    let (n, h, w) = (first[0], first[2], first[3]);
    let mut c_total = 0;
    for p in parts {
        let s = p.shape();
        if s.len() != 4 || s[0] != n || s[2] != h || s[3] != w {
            return Err(Error::shape(
                "concat_channels",
                format!("incompatible shapes {first:?} vs {s:?}"),
            ));
        }
        c_total += s[1];
    }
    let plane = h * w;
    let mut data = vec![T::ZERO; n * c_total * plane];
    for ni in 0..n {
        let mut c_off = 0;
        for p in parts {
            let c = p.shape()[1];
            let src = &p.data()[ni * c * plane..(ni + 1) * c * plane];
            let dst_start = (ni * c_total + c_off) * plane;
            data[dst_start..dst_start + c * plane].copy_from_slice(src);
            c_off += c;
        }
    }
    let out = Tensor::new(&[n, c_total, h, w], data)?;
    let parents: Vec<Tensor<T>> = parts.to_vec();
    g.record(&out, move |go| {
        // Split the output gradient back into per-input channel ranges.
        let mut c_off = 0;
        for p in &parents {
            let c = p.shape()[1];
            let mut dp = vec![T::ZERO; p.len()];
            for ni in 0..n {
                let src_start = (ni * c_total + c_off) * plane;
                let dst_start = ni * c * plane;
                dp[dst_start..dst_start + c * plane]
                    .copy_from_slice(&go[src_start..src_start + c * plane]);
            }
            p.accumulate_grad(&dp);
            c_off += c;
        }
    });
    Ok(out)
}
