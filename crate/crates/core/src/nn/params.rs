//! Named parameter collections with deterministic declaration order.
//!
//! Declaration order is load-bearing: checkpoints store raw parameter blocks
//! in this order, and the optimizer walks parameters in this order so that
//! float summation effects are reproducible run to run.

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::{Error, Result};
use rand::Rng;
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct ParamSet<S> {
    order: Vec<String>,
    map: HashMap<String, Tensor<S>>,
}

impl<S: Scalar> Default for ParamSet<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamSet<S> {
    pub fn new() -> Self {
        ParamSet { order: Vec::new(), map: HashMap::new() }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<S>) -> Result<()> {
        if self.map.contains_key(name) {
            return Err(Error::invalid("param set", format!("duplicate parameter {name:?}")));
        }
        self.order.push(name.to_string());
        self.map.insert(name.to_string(), tensor);
        Ok(())
    }

    /// Weight matrix `[fan_in, fan_out]` drawn uniform in
    /// `±sqrt(6/(fan_in+fan_out))`.
    pub fn xavier(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<()> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        self.insert(name, Tensor::uniform(&[fan_in, fan_out], -bound, bound, rng))
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<()> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<()> {
        self.insert(name, Tensor::filled(shape, S::from_f64(value)))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>> {
        self.map
            .get(name)
            .ok_or_else(|| Error::invalid("param set", format!("no parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>> {
        self.map
            .get_mut(name)
            .ok_or_else(|| Error::invalid("param set", format!("no parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    /// Parameter names in declaration order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    /// `(name, tensor)` pairs in declaration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.order.iter().map(move |n| (n.as_str(), &self.map[n]))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Total number of scalar values across all parameters.
    pub fn total_values(&self) -> usize {
        self.map.values().map(Tensor::numel).sum()
    }

    /// Convert element type (f32 <-> f64), preserving order and shapes.
    pub fn cast<T: Scalar>(&self) -> ParamSet<T> {
        let mut out = ParamSet::new();
        for (name, tensor) in self.iter() {
            let data: Vec<T> = tensor.data().iter().map(|&v| T::from_f64(v.to_f64())).collect();
            let t = Tensor::new(tensor.shape().to_vec(), data).expect("cast shape");
            out.insert(name, t).expect("cast preserves unique names");
        }
        out
    }
}
