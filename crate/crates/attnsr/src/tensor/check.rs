//! Finite-difference verification of recorded gradients.

use super::{Graph, Scalar, Tensor};

/// Outcome of a [`grad_check`] run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over every element of every input.
    pub max_rel_err: f64,
    /// `(input index, element index, analytic, numeric)` for the worst element.
    pub worst: Option<(usize, usize, f64, f64)>,
    /// Total number of elements compared.
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compare analytic gradients of `f` against central finite differences.
///
/// `f` must map the given inputs to a scalar tensor and be deterministic: it
/// is re-evaluated `2 * total_elements` times with single-element
/// perturbations of `eps`. Per element the comparison is
///
/// ```text
/// rel_err = |analytic - numeric| / max(1, |analytic|, |numeric|)
/// ```
///
/// which behaves like absolute error near zero and relative error for large
/// gradients. Inputs that receive no gradient at all are treated as
/// all-zeros (legitimately disconnected inputs pass; wrongly dropped
/// gradients show up as numeric disagreement).
///
/// Run this with `T = f64`: in `f32` the finite-difference noise floor sits
/// above any useful tolerance.
pub fn grad_check<T, F>(f: F, inputs: &[Tensor<T>], eps: f64) -> GradCheckReport
where
    T: Scalar,
    F: Fn(&Graph<T>, &[Tensor<T>]) -> Tensor<T>,
{
    // Analytic pass.
    for x in inputs {
        x.clear_grad();
    }
    let g = Graph::new();
    let out = f(&g, inputs);
    assert_eq!(out.len(), 1, "grad_check target must be scalar");
    g.backward(&out).expect("scalar loss");
    let analytic: Vec<Vec<T>> = inputs
        .iter()
        .map(|x| x.take_grad().unwrap_or_else(|| vec![T::ZERO; x.len()]))
        .collect();

    // Numeric passes: central differences, one element at a time.
    let eval = |xs: &[Tensor<T>]| -> f64 {
        let g = Graph::disabled();
        f(&g, xs).data()[0].to_f64()
    };
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    for (i, x) in inputs.iter().enumerate() {
        for j in 0..x.len() {
            let base = x.data()[j].to_f64();
            let probe = |v: f64| -> f64 {
                let mut data = x.data().to_vec();
                data[j] = T::from_f64(v);
                let mut xs: Vec<Tensor<T>> = inputs.to_vec();
                xs[i] = Tensor::new(x.shape(), data).expect("same shape");
                eval(&xs)
            };
            let numeric = (probe(base + eps) - probe(base - eps)) / (2.0 * eps);
            let a = analytic[i][j].to_f64();
            let rel = (a - numeric).abs() / 1.0_f64.max(a.abs()).max(numeric.abs());
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((i, j, a, numeric));
            }
        }
    }
    report
}
