//! Decoder-only causal transformer: pre-norm residual blocks with multi-head
//! self-attention and a 4x GELU MLP, a final layer norm, and a 2-logit head.

use crate::nn::{Graph, NodeId, Scalar, Tensor};
use crate::Result;

use super::{BoundParams, ForwardOutput, ModelConfig};

/// Additive causal mask `[t, t]`: zero on and below the diagonal, a large
/// negative constant above it so softmax assigns future keys zero weight.
fn causal_mask<S: Scalar>(t: usize) -> Tensor<S> {
    let mut m = Tensor::zeros(&[t, t]);
    let data = m.data_mut();
    let neg = S::from_f64(-1e9);
    for q in 0..t {
        for k in q + 1..t {
            data[q * t + k] = neg;
        }
    }
    m
}

/// Layer norm followed by a learned elementwise gain and bias.
fn layer_norm_affine<S: Scalar>(
    g: &mut Graph<S>,
    p: &BoundParams,
    x: NodeId,
    prefix: &str,
) -> Result<NodeId> {
    let normed = g.layer_norm(x)?;
    let scaled = g.mul(normed, p.node(&format!("{prefix}.gain"))?)?;
    g.add(scaled, p.node(&format!("{prefix}.bias"))?)
}

/// Linear map with bias; the projection weights may be a per-head column
/// slice of the full `[d, d]` matrix.
fn linear<S: Scalar>(g: &mut Graph<S>, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
    let y = g.matmul(x, w)?;
    g.add(y, b)
}

pub(super) fn transformer_forward<S: Scalar>(
    g: &mut Graph<S>,
    p: &BoundParams,
    cfg: &ModelConfig,
    tokens: NodeId,
    seq_len: usize,
) -> Result<ForwardOutput> {
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mask = g.input(causal_mask::<S>(seq_len));
    let mut x = tokens;
    let mut attention = Vec::with_capacity(cfg.n_layers);

    for layer in 0..cfg.n_layers {
        let at = |t: &str| format!("layer{layer}.attn.{t}");
        let normed = layer_norm_affine(g, p, x, &format!("layer{layer}.ln1"))?;
        let wq = p.node(&at("wq"))?;
        let wk = p.node(&at("wk"))?;
        let wv = p.node(&at("wv"))?;
        let bq = p.node(&at("bq"))?;
        let bk = p.node(&at("bk"))?;
        let bv = p.node(&at("bv"))?;

        let mut heads = Vec::with_capacity(cfg.n_heads);
        let mut mixes = Vec::with_capacity(cfg.n_heads);
        for h in 0..cfg.n_heads {
            let col = h * dh;
            let q = {
                let w = g.slice(wq, 1, col, dh)?;
                let b = g.slice(bq, 0, col, dh)?;
                linear(g, normed, w, b)?
            };
            let k = {
                let w = g.slice(wk, 1, col, dh)?;
                let b = g.slice(bk, 0, col, dh)?;
                linear(g, normed, w, b)?
            };
            let v = {
                let w = g.slice(wv, 1, col, dh)?;
                let b = g.slice(bv, 0, col, dh)?;
                linear(g, normed, w, b)?
            };
            let kt = g.transpose(k)?;
            let scores = g.matmul(q, kt)?;
            let scores = g.scale(scores, scale);
            let masked = g.add(scores, mask)?;
            let weights = g.softmax(masked)?;
            heads.push(weights);
            mixes.push(g.matmul(weights, v)?);
        }
        attention.push(heads);

        let merged = g.concat(&mixes, 2)?;
        let projected = linear(g, merged, p.node(&at("wo"))?, p.node(&at("bo"))?)?;
        x = g.add(x, projected)?;

        let normed = layer_norm_affine(g, p, x, &format!("layer{layer}.ln2"))?;
        let mid = linear(
            g,
            normed,
            p.node(&format!("layer{layer}.mlp.w1"))?,
            p.node(&format!("layer{layer}.mlp.b1"))?,
        )?;
        let mid = g.gelu(mid);
        let out = linear(
            g,
            mid,
            p.node(&format!("layer{layer}.mlp.w2"))?,
            p.node(&format!("layer{layer}.mlp.b2"))?,
        )?;
        x = g.add(x, out)?;
    }

    let x = layer_norm_affine(g, p, x, "final_ln")?;
    let logits = linear(g, x, p.node("head.w")?, p.node("head.b")?)?;
    Ok(ForwardOutput { logits, attention })
}
