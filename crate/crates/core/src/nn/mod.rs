//! A small reverse-mode automatic-differentiation engine and the optimizer /
//! checkpoint plumbing used by the trainable sequence models.
//!
//! The design is deliberately minimal: a [`Graph`] is an eager tape of tensor
//! nodes built per forward pass, [`Graph::backward`] runs one reverse sweep
//! that accumulates gradients on parameter leaves only, and [`ParamSet`] plus
//! [`Adam`] carry the persistent training state between passes. Everything is
//! generic over the scalar type so the same model code runs in `f32` for
//! training and `f64` for numerical gradient verification (see [`gradcheck`]).

mod adam;
mod checkpoint;
pub mod gradcheck;
mod graph;
mod params;
mod scalar;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointHeader, ParamBlock, CHECKPOINT_FORMAT,
};
pub use graph::{Graph, NodeId};
pub use params::ParamSet;
pub use scalar::Scalar;
pub use tensor::Tensor;
