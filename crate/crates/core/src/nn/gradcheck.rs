//! Central-difference gradient verification, used by the unit tests here and
//! by the full-model checks in the acceptance suite. Always run in `f64`,
//! where a 1e-4 step gives numeric derivatives good to far better than the
//! tolerances being enforced.

use super::graph::{Graph, NodeId};
use super::params::ParamSet;
use super::tensor::Tensor;
use crate::Result;
use std::collections::HashMap;

/// Default central-difference step.
pub const FD_EPS: f64 = 1e-4;

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Check one op (or small composition): `build` must construct a scalar loss
/// from differentiable leaves made of `inputs`. Returns the worst relative
/// error between analytic and central-difference gradients over every element
/// of every input.
pub fn op_gradcheck<F>(inputs: &[Tensor<f64>], build: F) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |tensors: &[Tensor<f64>]| -> Result<(f64, Vec<Option<Tensor<f64>>>)> {
        let mut g: Graph<f64> = Graph::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| g.param(t)).collect();
        let loss = build(&mut g, &ids)?;
        let value = g.value(loss).item();
        g.backward(loss)?;
        let grads = ids.iter().map(|&id| g.grad(id)).collect();
        Ok((value, grads))
    };
    let (_, analytic) = eval(inputs)?;
    let mut worst = 0.0f64;
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let grads = analytic[i]
            .as_ref()
            .unwrap_or_else(|| panic!("input {i} received no gradient"));
        for j in 0..input.numel() {
            let orig = input.data()[j];
            work[i].data_mut()[j] = orig + FD_EPS;
            let (lp, _) = eval(&work)?;
            work[i].data_mut()[j] = orig - FD_EPS;
            let (lm, _) = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (lp - lm) / (2.0 * FD_EPS);
            worst = worst.max(rel_error(grads.data()[j], numeric));
        }
    }
    Ok(worst)
}

/// Full-model check: compare an analytic gradient map against central
/// differences of `loss_fn` for every element of every parameter. Returns the
/// worst relative error and where it occurred.
pub fn param_gradcheck<F>(
    params: &ParamSet<f64>,
    analytic: &HashMap<String, Tensor<f64>>,
    eps: f64,
    mut loss_fn: F,
) -> (f64, String)
where
    F: FnMut(&ParamSet<f64>) -> f64,
{
    let mut worst = (0.0f64, String::new());
    let mut work = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let grad = analytic
            .get(name)
            .unwrap_or_else(|| panic!("no analytic gradient for parameter {name:?}"));
        for j in 0..grad.numel() {
            let orig = params.get(name).expect("param exists").data()[j];
            work.get_mut(name).expect("param exists").data_mut()[j] = orig + eps;
            let lp = loss_fn(&work);
            work.get_mut(name).expect("param exists").data_mut()[j] = orig - eps;
            let lm = loss_fn(&work);
            work.get_mut(name).expect("param exists").data_mut()[j] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            let rel = rel_error(grad.data()[j], numeric);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{j}]"));
            }
        }
    }
    worst
}
