//! Per-channel batch normalization for NCHW tensors.

use std::cell::RefCell;

use super::{expect_nchw, Mode, Parameter};
use crate::tensor::{Graph, Scalar, Tensor};
use crate::Result;

/// Batch normalization over the `(n, h, w)` extent of each channel.
///
/// Training mode normalizes with the current batch's mean and *biased*
/// variance and folds those statistics into the running ones as
///
/// ```text
/// running = momentum * running + (1 - momentum) * batch
/// ```
///
/// with `momentum = 0.9`. Eval mode normalizes with the frozen running
/// statistics. Both modes then apply the learned affine `gamma * xhat + beta`.
pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Parameter<T>,
    pub beta: Parameter<T>,
    running_mean: RefCell<Vec<T>>,
    running_var: RefCell<Vec<T>>,
    channels: usize,
    eps: T,
    momentum: T,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Parameter::new(Tensor::full(&[channels], T::ONE)),
            beta: Parameter::new(Tensor::zeros(&[channels])),
            running_mean: RefCell::new(vec![T::ZERO; channels]),
            running_var: RefCell::new(vec![T::ONE; channels]),
            channels,
            eps: T::from_f64(1e-5),
            momentum: T::from_f64(0.9),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Snapshot of the running mean (for serialization).
    pub fn running_mean(&self) -> Vec<T> {
        self.running_mean.borrow().clone()
    }

    /// Snapshot of the running variance (for serialization).
    pub fn running_var(&self) -> Vec<T> {
        self.running_var.borrow().clone()
    }

    /// Restore running statistics (for deserialization).
    pub fn set_running_stats(&self, mean: Vec<T>, var: Vec<T>) {
        assert_eq!(mean.len(), self.channels);
        assert_eq!(var.len(), self.channels);
        *self.running_mean.borrow_mut() = mean;
        *self.running_var.borrow_mut() = var;
    }

    pub fn forward(&self, g: &Graph<T>, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = expect_nchw("batch_norm", x, self.channels)?;
        let plane = h * w;
        let count = n * plane;
        if mode == Mode::Train && count < 2 {
            return Err(crate::Error::invalid(
                "batch_norm",
                format!("training needs at least 2 values per channel, got {count}"),
            ));
        }
        let countf = T::from_f64(count as f64);
        let xd = x.data();
        let gamma = self.gamma.tensor();
        let beta = self.beta.tensor();

        // Pick the normalization statistics for this pass.
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = vec![T::ZERO; c];
                let mut var = vec![T::ZERO; c];
                for ci in 0..c {
                    let mut acc = T::ZERO;
                    for ni in 0..n {
                        let base = (ni * c + ci) * plane;
                        for &v in &xd[base..base + plane] {
                            acc += v;
                        }
                    }
                    let m = acc / countf;
                    let mut vacc = T::ZERO;
                    for ni in 0..n {
                        let base = (ni * c + ci) * plane;
                        for &v in &xd[base..base + plane] {
                            let d = v - m;
                            vacc += d * d;
                        }
                    }
                    mean[ci] = m;
                    var[ci] = vacc / countf; // biased: divide by count, not count-1
                }
                {
                    let mut rm = self.running_mean.borrow_mut();
                    let mut rv = self.running_var.borrow_mut();
                    for ci in 0..c {
                        rm[ci] = self.momentum * rm[ci] + (T::ONE - self.momentum) * mean[ci];
                        rv[ci] = self.momentum * rv[ci] + (T::ONE - self.momentum) * var[ci];
                    }
                }
                (mean, var)
            }
            Mode::Eval => (self.running_mean(), self.running_var()),
        };

        let inv_std: Vec<T> = var.iter().map(|&v| T::ONE / (v + self.eps).sqrt()).collect();
        let mut out = vec![T::ZERO; xd.len()];
        for ni in 0..n {
            for ci in 0..c {
                let base = (ni * c + ci) * plane;
                let (m, istd) = (mean[ci], inv_std[ci]);
                let (ga, be) = (gamma.data()[ci], beta.data()[ci]);
                for i in base..base + plane {
                    out[i] = ga * (xd[i] - m) * istd + be;
                }
            }
        }
        let out = Tensor::new(&[n, c, h, w], out)?;

        if g.enabled() {
            let (px, pg, pb) = (x.clone(), gamma.clone(), beta.clone());
            match mode {
                Mode::Train => {
                    g.record(&out, move |go| {
                        let xd = px.data();
                        let mut dx = vec![T::ZERO; xd.len()];
                        let mut dgamma = vec![T::ZERO; c];
                        let mut dbeta = vec![T::ZERO; c];
                        for ci in 0..c {
                            let (m, istd) = (mean[ci], inv_std[ci]);
                            let ga = pg.data()[ci];
                            // First pass: the two reductions the fused
                            // formula needs (sums of dxhat and dxhat*xhat).
                            let mut sum_dxh = T::ZERO;
                            let mut sum_dxh_xh = T::ZERO;
                            for ni in 0..n {
                                let base = (ni * c + ci) * plane;
                                for i in base..base + plane {
                                    let xh = (xd[i] - m) * istd;
                                    let dxh = go[i] * ga;
                                    sum_dxh += dxh;
                                    sum_dxh_xh += dxh * xh;
                                    dgamma[ci] += go[i] * xh;
                                    dbeta[ci] += go[i];
                                }
                            }
                            // Second pass: dx = istd/count *
                            //   (count*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
                            for ni in 0..n {
                                let base = (ni * c + ci) * plane;
                                for i in base..base + plane {
                                    let xh = (xd[i] - m) * istd;
                                    let dxh = go[i] * ga;
                                    dx[i] = istd / countf
                                        * (countf * dxh - sum_dxh - xh * sum_dxh_xh);
                                }
                            }
                        }
                        px.accumulate_grad(&dx);
                        pg.accumulate_grad(&dgamma);
                        pb.accumulate_grad(&dbeta);
                    });
                }
                Mode::Eval => {
                    // Frozen statistics make this a per-channel affine map.
                    g.record(&out, move |go| {
                        let xd = px.data();
                        let mut dx = vec![T::ZERO; xd.len()];
                        let mut dgamma = vec![T::ZERO; c];
                        let mut dbeta = vec![T::ZERO; c];
                        for ci in 0..c {
                            let (m, istd) = (mean[ci], inv_std[ci]);
                            let ga = pg.data()[ci];
                            for ni in 0..n {
                                let base = (ni * c + ci) * plane;
                                for i in base..base + plane {
                                    dx[i] = go[i] * ga * istd;
                                    dgamma[ci] += go[i] * (xd[i] - m) * istd;
                                    dbeta[ci] += go[i];
                                }
                            }
                        }
                        px.accumulate_grad(&dx);
                        pg.accumulate_grad(&dgamma);
                        pb.accumulate_grad(&dbeta);
                    });
                }
            }
        }
        Ok(out)
    }
}
