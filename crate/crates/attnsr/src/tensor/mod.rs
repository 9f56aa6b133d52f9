//! Reverse-mode automatic differentiation over dense tensors.
//!
//! The design is a classic define-by-run tape: every differentiable op
//! computes its output eagerly and, when the [`Graph`] is recording, pushes a
//! closure that knows how to propagate the output's gradient back to the
//! inputs. [`Graph::backward`] then walks the tape in reverse recording
//! order, which is a valid topological order by construction.
//!
//! Tensors are immutable once built. Shared ownership (`Rc`) keeps the tape's
//! captured inputs alive until backward runs, and gradients accumulate in a
//! `RefCell` side-slot so fan-out (one tensor consumed by several ops) sums
//! contributions naturally.
//!
//! Everything is generic over [`Scalar`] (`f32` for training and inference,
//! `f64` for high-precision gradient verification).

mod check;
mod ops;

pub use check::{grad_check, GradCheckReport};
pub use ops::{abs, add, concat_channels, mean, mul, relu, scale, sigmoid, sub, sum};

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::{Error, Result};

/// Element type for tensors: the arithmetic and the BLAS kernel entry point.
pub trait Scalar:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + std::fmt::Display
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    /// Smallest positive normal value (a strict lower saturation bound).
    const TINY: Self;
    /// Largest representable value below 1 (a strict upper saturation bound).
    const BELOW_ONE: Self;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn max(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
    fn is_finite(self) -> bool;

    /// Dense matrix multiply `C = alpha * A @ B + beta * C` with explicit
    /// row/column strides, dispatching to the width-specific BLAS kernel.
    ///
    /// # Safety
    /// Pointers must reference buffers valid for the `m x k`, `k x n`, and
    /// `m x n` access patterns implied by the strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const TINY: Self = <$t>::MIN_POSITIVE;
            const BELOW_ONE: Self = 1.0 - <$t>::EPSILON / 2.0;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn exp(self) -> Self {
                <$t>::exp(self)
            }
            #[inline]
            fn max(self, other: Self) -> Self {
                <$t>::max(self, other)
            }
            #[inline]
            fn min(self, other: Self) -> Self {
                <$t>::min(self, other)
            }
            #[inline]
            fn is_finite(self) -> bool {
                <$t>::is_finite(self)
            }

            #[inline]
            unsafe fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: *const Self,
                rsa: isize,
                csa: isize,
                b: *const Self,
                rsb: isize,
                csb: isize,
                beta: Self,
                c: *mut Self,
                rsc: isize,
                csc: isize,
            ) {
                $gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

struct Inner<T> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: RefCell<Option<Vec<T>>>,
}

/// A dense, immutable, shape-tagged value with a gradient side-slot.
///
/// Cloning a `Tensor` is cheap (reference count bump) and clones share both
/// the data and the accumulated gradient.
pub struct Tensor<T: Scalar> {
    inner: Rc<Inner<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> Tensor<T> {
    /// Build a tensor from a shape and matching flat data (row-major; for
    /// images the layout is `[n, c, h, w]`).
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::invalid(
                "Tensor::new",
                format!("shape {shape:?} must be non-empty with positive dims"),
            ));
        }
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {shape:?} wants {want} elements, data has {}", data.len()),
            ));
        }
        Ok(Tensor {
            inner: Rc::new(Inner {
                shape: shape.to_vec(),
                data,
                grad: RefCell::new(None),
            }),
        })
    }

    /// All-zeros tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::full(shape, T::ZERO)
    }

    /// Constant-filled tensor of the given shape.
    pub fn full(shape: &[usize], value: T) -> Self {
        let n: usize = shape.iter().product();
        assert!(
            !shape.is_empty() && n > 0,
            "tensor shape must be non-empty with positive dims, got {shape:?}"
        );
        Tensor {
            inner: Rc::new(Inner {
                shape: shape.to_vec(),
                data: vec![value; n],
                grad: RefCell::new(None),
            }),
        }
    }

    /// Single-element tensor holding `value`.
    pub fn scalar(value: T) -> Self {
        Tensor::full(&[1], value)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn data(&self) -> &[T] {
        &self.inner.data
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.inner.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction forbids zero-sized tensors
    }

    /// True if both handles point at the same allocation.
    pub fn same_storage(&self, other: &Tensor<T>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    /// Copy of the accumulated gradient, if any op has written one.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    /// Remove and return the accumulated gradient.
    pub fn take_grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow_mut().take()
    }

    /// Drop any accumulated gradient.
    pub fn clear_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Add `delta` elementwise into the gradient slot (allocating zeros on
    /// first touch). Panics on length mismatch: callers are internal and
    /// always pass a buffer of exactly `len()` elements.
    pub fn accumulate_grad(&self, delta: &[T]) {
        assert_eq!(delta.len(), self.len(), "gradient length mismatch");
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += *di;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("grad", &self.inner.grad.borrow().is_some())
            .finish()
    }
}

struct Node<T: Scalar> {
    out: Tensor<T>,
    rule: Box<dyn FnOnce(&[T])>,
}

/// Recording tape for reverse-mode differentiation.
///
/// Ops record one node per call while the graph is enabled; disabling the
/// graph (the inference path) skips recording entirely so intermediate
/// tensors free as soon as they go out of scope.
pub struct Graph<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    enabled: Cell<bool>,
}

impl<T: Scalar> Graph<T> {
    /// A recording graph.
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
            enabled: Cell::new(true),
        }
    }

    /// A non-recording graph for inference/evaluation passes.
    pub fn disabled() -> Self {
        let g = Graph::new();
        g.enabled.set(false);
        g
    }

    pub fn enabled(&self) -> bool {
        self.enabled.get()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Forget every recorded node without running backward.
    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
    }

    /// Record a backward rule for `out`. The rule receives the accumulated
    /// gradient of `out` and must push gradient into the op's inputs via
    /// [`Tensor::accumulate_grad`]. No-op while the graph is disabled.
    pub fn record(&self, out: &Tensor<T>, rule: impl FnOnce(&[T]) + 'static) {
        if self.enabled.get() {
            self.nodes.borrow_mut().push(Node {
                out: out.clone(),
                rule: Box::new(rule),
            });
        }
    }

    /// Run reverse-mode accumulation from scalar `loss`, consuming the tape.
    ///
    /// Seeds `d loss / d loss = 1`, then visits nodes newest-first. Each
    /// node's output gradient is *taken* (freeing activation gradients as
    /// they are consumed); nodes whose output never received gradient are
    /// skipped, so side branches that do not feed the loss cost nothing.
    pub fn backward(&self, loss: &Tensor<T>) -> Result<()> {
        if loss.len() != 1 {
            return Err(Error::shape(
                "Graph::backward",
                format!("loss must be a scalar, got shape {:?}", loss.shape()),
            ));
        }
        loss.accumulate_grad(&[T::ONE]);
        let nodes = std::mem::take(&mut *self.nodes.borrow_mut());
        for node in nodes.into_iter().rev() {
            if let Some(g) = node.out.take_grad() {
                (node.rule)(&g);
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Graph::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_new_checks_shape() {
        assert!(Tensor::<f32>::new(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::<f32>::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(&[], vec![]).is_err());
        assert!(Tensor::<f32>::new(&[2, 0], vec![]).is_err());
    }

    #[test]
    fn grad_accumulates_across_writes() {
        let t = Tensor::<f64>::zeros(&[3]);
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[10.0, 20.0, 30.0]);
        assert_eq!(t.grad().unwrap(), vec![11.0, 22.0, 33.0]);
        assert_eq!(t.take_grad().unwrap(), vec![11.0, 22.0, 33.0]);
        assert!(t.grad().is_none());
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let g = Graph::<f64>::new();
        let t = Tensor::zeros(&[2]);
        assert!(g.backward(&t).is_err());
    }

    #[test]
    fn fanout_sums_contributions() {
        // y = x*x + x  =>  dy/dx = 2x + 1
        let g = Graph::new();
        let x = Tensor::new(&[2], vec![3.0_f64, -2.0]).unwrap();
        let xx = mul(&g, &x, &x).unwrap();
        let y = add(&g, &xx, &x).unwrap();
        let loss = sum(&g, &y);
        g.backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![7.0, -3.0]);
        assert!(g.is_empty(), "backward consumes the tape");
    }

    #[test]
    fn disabled_graph_records_nothing() {
        let g = Graph::disabled();
        let x = Tensor::new(&[2], vec![1.0_f64, 2.0]).unwrap();
        let y = mul(&g, &x, &x).unwrap();
        assert_eq!(y.data(), &[1.0, 4.0]);
        assert!(g.is_empty());
    }
}
