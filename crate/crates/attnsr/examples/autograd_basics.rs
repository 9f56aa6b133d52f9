//! A tour of the reverse-mode autodiff core: record operations on tensors,
//! backpropagate from a scalar, read the gradients, and cross-check one of
//! them against finite differences.
//!
//! Usage: cargo run --example autograd_basics

use attnsr::tensor::{grad_check, mean, mul, relu, sigmoid, Graph, Tensor};

fn main() -> attnsr::Result<()> {
    // y = mean(relu(a * b) + sigmoid(a)); gradients flow to both inputs,
    // and `a` accumulates from its two uses.
    let a = Tensor::new(&[2, 3], vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5])?;
    let b = Tensor::new(&[2, 3], vec![1.0, 2.0, -0.5, 3.0, 0.5, 0.1])?;

    let g = Graph::<f64>::new();
    let prod = mul(&g, &a, &b)?;
    let gated = relu(&g, &prod);
    let squash = sigmoid(&g, &a);
    let y = mean(&g, &attnsr::tensor::add(&g, &gated, &squash)?);
    println!("y = {:.6}", y.data()[0]);

    g.backward(&y)?;
    println!("dy/da = {:?}", a.grad().expect("a participated"));
    println!("dy/db = {:?}", b.grad().expect("b participated"));

    // The same function as a closure, checked numerically: every analytic
    // partial must agree with a central finite difference.
    let report = grad_check(
        |g, xs| {
            let prod = mul(g, &xs[0], &xs[1]).unwrap();
            let gated = relu(g, &prod);
            let squash = sigmoid(g, &xs[0]);
            mean(g, &attnsr::tensor::add(g, &gated, &squash).unwrap())
        },
        &[a, b],
        1e-6,
    );
    println!(
        "checked {} partial derivatives: max relative error {:.3e}",
        report.checked, report.max_rel_err
    );
    assert!(report.passes(1e-7), "analytic and numeric gradients agree");

    // Turning the tape off makes the same calls pure inference: nothing is
    // recorded and backward has nothing to do.
    let silent = Graph::<f64>::disabled();
    let c = Tensor::new(&[2], vec![1.0, 2.0])?;
    let d = relu(&silent, &c);
    println!("inference-only relu: {:?} (no gradients tracked)", d.data());
    Ok(())
}
