//! Weight initialization.

use rand::Rng;

use crate::tensor::{Scalar, Tensor};

/// Xavier/Glorot uniform initialization: samples from
/// `U(-limit, limit)` with `limit = sqrt(6 / (fan_in + fan_out))`.
///
/// For convolution weights the fans count `channels * kernel_area`.
pub fn xavier_uniform<T: Scalar, R: Rng>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<T> {
    assert!(fan_in > 0 && fan_out > 0, "fans must be positive");
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n)
        .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
        .collect();
    Tensor::new(shape, data).expect("shape/data agree by construction")
}
