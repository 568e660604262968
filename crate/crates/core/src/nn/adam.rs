//! Bias-corrected Adam.

use super::params::ParamSet;
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::{Error, Result};
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct Adam<S> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: HashMap<String, Vec<S>>,
    v: HashMap<String, Vec<S>>,
}

impl<S: Scalar> Adam<S> {
    /// Defaults β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: HashMap::new(), v: HashMap::new() }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One optimizer step. Parameters are walked in declaration order; a
    /// parameter with no entry in `grads` is left untouched this step.
    pub fn apply(&mut self, params: &mut ParamSet<S>, grads: &HashMap<String, Tensor<S>>) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let corr1 = 1.0 - self.beta1.powi(t);
        let corr2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (S::from_f64(self.beta1), S::from_f64(self.beta2));
        let (c1, c2) = (S::from_f64(1.0 - self.beta1), S::from_f64(1.0 - self.beta2));
        let lr = S::from_f64(self.lr / corr1);
        let inv_sqrt_corr2 = S::from_f64(1.0 / corr2.sqrt());
        let eps = S::from_f64(self.eps);
        let names: Vec<String> = params.names().map(str::to_string).collect();
        for name in names {
            let Some(grad) = grads.get(&name) else {
                continue;
            };
            let param = params.get_mut(&name)?;
            if grad.shape() != param.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam",
                    lhs: param.shape().to_vec(),
                    rhs: grad.shape().to_vec(),
                });
            }
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![S::ZERO; param.numel()]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![S::ZERO; param.numel()]);
            for ((p, &g), (mi, vi)) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = b1 * *mi + c1 * g;
                *vi = b2 * *vi + c2 * g * g;
                // p -= lr/corr1 * m / (sqrt(v/corr2) + eps·~1); folding the
                // corrections into the scalars keeps the inner loop short.
                *p -= lr * *mi / ((*vi).sqrt() * inv_sqrt_corr2 + eps);
            }
        }
        Ok(())
    }
}
