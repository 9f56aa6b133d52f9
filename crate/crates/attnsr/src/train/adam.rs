//! Adam with bias correction, holding per-parameter moment tensors aligned
//! with the model's named-parameter order.

use crate::nn::Parameter;
use crate::tensor::Tensor;
use crate::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Optimizer state: first/second moment estimates per parameter plus the
/// shared step counter.
pub struct Adam {
    /// (parameter name, m, v), in the model's named-parameter order.
    moments: Vec<(String, Tensor<f32>, Tensor<f32>)>,
    t: u64,
}

impl Adam {
    /// Fresh zeroed state for the given parameter list.
    pub fn new(params: &[(String, &Parameter<f32>)]) -> Self {
        let moments = params
            .iter()
            .map(|(name, p)| {
                let shape = p.shape();
                (name.clone(), Tensor::zeros(&shape), Tensor::zeros(&shape))
            })
            .collect();
        Adam { moments, t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Moment tensors for serialization, in parameter order.
    pub fn named_moments(&self) -> impl Iterator<Item = (&str, &Tensor<f32>, &Tensor<f32>)> {
        self.moments.iter().map(|(n, m, v)| (n.as_str(), m, v))
    }

    /// Rebuild state from deserialized moments. The entries must match the
    /// model's parameter names one-to-one, in order.
    pub fn from_moments(moments: Vec<(String, Tensor<f32>, Tensor<f32>)>, t: u64) -> Self {
        Adam { moments, t }
    }

    /// One update: takes every parameter's accumulated gradient, advances
    /// the moments, and writes back `p - lr * m_hat / (sqrt(v_hat) + eps)`.
    ///
    /// Every parameter must have a populated gradient (a missing one means
    /// the forward/backward pass didn't reach it, which is a bug worth
    /// stopping for), and `params` must be the same list the state was
    /// created from.
    pub fn step(&mut self, params: &[(String, &Parameter<f32>)], lr: f64) -> Result<()> {
        if params.len() != self.moments.len() {
            return Err(Error::invalid(
                "adam_step",
                format!(
                    "{} parameters given, state tracks {}",
                    params.len(),
                    self.moments.len()
                ),
            ));
        }
        self.t += 1;
        // Fold the bias corrections into a single step size, then apply the
        // eps outside the corrected sqrt (the cited formulation).
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for ((name, p), (state_name, m, v)) in params.iter().zip(&mut self.moments) {
            if name != state_name {
                return Err(Error::invalid(
                    "adam_step",
                    format!("parameter order mismatch: {name} vs state {state_name}"),
                ));
            }
            let value = p.tensor();
            let grad = value.take_grad().ok_or_else(|| {
                Error::invalid("adam_step", format!("parameter {name} has no gradient"))
            })?;
            let mut new_value = value.data().to_vec();
            let mut new_m = m.data().to_vec();
            let mut new_v = v.data().to_vec();
            for i in 0..new_value.len() {
                let g = grad[i] as f64;
                let mi = BETA1 * new_m[i] as f64 + (1.0 - BETA1) * g;
                let vi = BETA2 * new_v[i] as f64 + (1.0 - BETA2) * g * g;
                new_m[i] = mi as f32;
                new_v[i] = vi as f32;
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                new_value[i] = (new_value[i] as f64 - lr * m_hat / (v_hat.sqrt() + EPS)) as f32;
            }
            *m = Tensor::new(&m.shape(), new_m).expect("moment shape is fixed");
            *v = Tensor::new(&v.shape(), new_v).expect("moment shape is fixed");
            p.set(Tensor::new(&value.shape(), new_value).expect("param shape is fixed"));
        }
        Ok(())
    }
}
