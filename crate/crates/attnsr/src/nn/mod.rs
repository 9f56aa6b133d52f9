//! Neural-network building blocks over the autodiff tensor core.
//!
//! Layers are plain structs holding [`Parameter`]s; their `forward` methods
//! delegate to free functions (`conv2d`, `maxpool2x2`, ...) that operate on
//! raw tensors, so tests can drive the ops directly without constructing
//! layers.

mod batchnorm;
mod conv;
mod deconv;
mod init;
mod pool;
mod shuffle;

pub use batchnorm::BatchNorm2d;
pub use conv::{conv2d, Conv2d};
pub use deconv::{conv2d_transposed, ConvTranspose2d};
pub use init::xavier_uniform;
pub use pool::maxpool2x2;
pub use shuffle::{pixel_shuffle, pixel_unshuffle};

use std::cell::RefCell;

use crate::tensor::{Scalar, Tensor};

/// Whether a forward pass uses batch statistics (and updates running ones)
/// or frozen running statistics. Only batch norm behaves differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A learnable tensor slot.
///
/// The optimizer replaces the held tensor wholesale after each step (tensors
/// themselves are immutable); the tape keeps the tensor that was actually
/// used in the forward pass alive, so gradients always land on the right
/// allocation.
pub struct Parameter<T: Scalar> {
    value: RefCell<Tensor<T>>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(value: Tensor<T>) -> Self {
        Parameter {
            value: RefCell::new(value),
        }
    }

    /// Handle to the current value (cheap clone).
    pub fn tensor(&self) -> Tensor<T> {
        self.value.borrow().clone()
    }

    /// Replace the current value.
    pub fn set(&self, value: Tensor<T>) {
        assert_eq!(
            value.shape(),
            self.value.borrow().shape(),
            "parameter update must preserve shape"
        );
        *self.value.borrow_mut() = value;
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value.borrow().shape().to_vec()
    }

    pub fn len(&self) -> usize {
        self.value.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Validate that `x` is `[n, c, h, w]` with the expected channel count.
pub(crate) fn expect_nchw<T: Scalar>(
    op: &'static str,
    x: &Tensor<T>,
    want_c: usize,
) -> crate::Result<(usize, usize, usize, usize)> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(crate::Error::shape(
            op,
            format!("expected [n, c, h, w], got {s:?}"),
        ));
    }
    if s[1] != want_c {
        return Err(crate::Error::shape(
            op,
            format!("expected {want_c} channels, got {} (shape {s:?})", s[1]),
        ));
    }
    Ok((s[0], s[1], s[2], s[3]))
}
