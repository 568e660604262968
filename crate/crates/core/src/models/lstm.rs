//! Stacked LSTM over the interleaved token sequence, with the same 2-logit
//! head as the transformer. Causality holds by construction: the hidden state
//! at step `t` is computed from tokens `0..=t` only.

use crate::nn::{Graph, NodeId, Scalar, Tensor};
use crate::Result;

use super::{BoundParams, ForwardOutput, ModelConfig};

pub(super) fn lstm_forward<S: Scalar>(
    g: &mut Graph<S>,
    p: &BoundParams,
    cfg: &ModelConfig,
    tokens: NodeId,
    seq_len: usize,
) -> Result<ForwardOutput> {
    let d = cfg.d_model;
    let batch = g.value(tokens).shape()[0];
    let mut layer_input = tokens;

    for layer in 0..cfg.n_layers {
        let wx = p.node(&format!("layer{layer}.lstm.wx"))?;
        let wh = p.node(&format!("layer{layer}.lstm.wh"))?;
        let b = p.node(&format!("layer{layer}.lstm.b"))?;
        let mut h = g.input(Tensor::zeros(&[batch, 1, d]));
        let mut c = g.input(Tensor::zeros(&[batch, 1, d]));
        let mut outputs = Vec::with_capacity(seq_len);
        for t in 0..seq_len {
            let x_t = g.slice(layer_input, 1, t, 1)?;
            let from_input = g.matmul(x_t, wx)?;
            let from_hidden = g.matmul(h, wh)?;
            let summed = g.add(from_input, from_hidden)?;
            let pre = g.add(summed, b)?;
            // Gate order along the 4d axis: input, forget, candidate, output.
            let i_gate = {
                let s = g.slice(pre, 2, 0, d)?;
                g.sigmoid(s)
            };
            let f_gate = {
                let s = g.slice(pre, 2, d, d)?;
                g.sigmoid(s)
            };
            let candidate = {
                let s = g.slice(pre, 2, 2 * d, d)?;
                g.tanh(s)
            };
            let o_gate = {
                let s = g.slice(pre, 2, 3 * d, d)?;
                g.sigmoid(s)
            };
            let kept = g.mul(f_gate, c)?;
            let written = g.mul(i_gate, candidate)?;
            c = g.add(kept, written)?;
            let squashed = g.tanh(c);
            h = g.mul(o_gate, squashed)?;
            outputs.push(h);
        }
        layer_input = g.concat(&outputs, 1)?;
    }

    let logits = {
        let y = g.matmul(layer_input, p.node("head.w")?)?;
        g.add(y, p.node("head.b")?)?
    };
    Ok(ForwardOutput { logits, attention: Vec::new() })
}
