//! Prompt-to-token conversion: batching, the shared input/label embedding,
//! interleaving, and positional encodings.

use crate::nn::{Graph, NodeId, Scalar, Tensor};
use crate::sampler::PromptSequence;
use crate::{Error, Result};

use super::{BoundParams, ModelConfig, PositionEncoding};

/// A batch of same-shape prompts, flattened into the tensors the models
/// consume: raw points `[batch, m, n]`, lifted label vectors
/// `[batch, m-1, n]` (label `y_k` becomes `(y_k, 0, …, 0)`; the final label
/// is never an input), and the full label list used as prediction targets.
#[derive(Clone, Debug)]
pub struct PromptBatch<S> {
    pub n: usize,
    pub m: usize,
    pub batch: usize,
    pub x_tokens: Tensor<S>,
    pub y_tokens: Tensor<S>,
    /// Row-major `[batch, m]` labels; entry `b*m + k` is the target read at
    /// token position `2k` of prompt `b`.
    pub targets: Vec<u8>,
}

impl<S: Scalar> PromptBatch<S> {
    pub fn from_prompts(prompts: &[PromptSequence]) -> Result<Self> {
        let first = prompts
            .first()
            .ok_or_else(|| Error::invalid("prompt batch", "no prompts given".to_string()))?;
        let n = first.xs[0].len();
        let m = first.xs.len();
        if m < 2 {
            return Err(Error::invalid("prompt batch", "need at least 2 points per prompt".to_string()));
        }
        let batch = prompts.len();
        let mut x_tokens = Tensor::zeros(&[batch, m, n]);
        let mut y_tokens = Tensor::zeros(&[batch, m - 1, n]);
        let mut targets = Vec::with_capacity(batch * m);
        for (b, p) in prompts.iter().enumerate() {
            if p.xs.len() != m || p.ys.len() != m || p.xs.iter().any(|x| x.len() != n) {
                return Err(Error::invalid(
                    "prompt batch",
                    format!("prompt {b} does not match shape m={m}, n={n}"),
                ));
            }
            let xd = x_tokens.data_mut();
            for (k, x) in p.xs.iter().enumerate() {
                for (i, &bit) in x.bits().iter().enumerate() {
                    xd[(b * m + k) * n + i] = S::from_f64(f64::from(bit));
                }
            }
            let yd = y_tokens.data_mut();
            for (k, &y) in p.ys[..m - 1].iter().enumerate() {
                yd[(b * (m - 1) + k) * n] = S::from_f64(f64::from(y));
            }
            targets.extend_from_slice(&p.ys);
        }
        Ok(Self { n, m, batch, x_tokens, y_tokens, targets })
    }

    /// Interleaved token-sequence length, `2m - 1`.
    pub fn seq_len(&self) -> usize {
        2 * self.m - 1
    }
}

/// Fixed absolute sinusoidal position table `[len, d]`.
pub(super) fn sinusoidal_table<S: Scalar>(len: usize, d: usize) -> Tensor<S> {
    let mut t = Tensor::zeros(&[len, d]);
    let data = t.data_mut();
    for pos in 0..len {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            let v = if i % 2 == 0 { angle.sin() } else { angle.cos() };
            data[pos * d + i] = S::from_f64(v);
        }
    }
    t
}

/// Embed a prompt batch into the interleaved token tensor `[batch, 2m-1, d]`:
/// one shared linear map over points and lifted labels, then positional
/// encodings added to every token.
pub(super) fn embed_tokens<S: Scalar>(
    g: &mut Graph<S>,
    p: &BoundParams,
    cfg: &ModelConfig,
    batch: &PromptBatch<S>,
) -> Result<NodeId> {
    if batch.n != cfg.n {
        return Err(Error::DimMismatch { expected: cfg.n, got: batch.n });
    }
    let t = batch.seq_len();
    if t > cfg.max_seq_len {
        return Err(Error::invalid(
            "prompt batch",
            format!("sequence length {t} exceeds max_seq_len {}", cfg.max_seq_len),
        ));
    }
    let x_in = g.input(batch.x_tokens.clone());
    let y_in = g.input(batch.y_tokens.clone());
    let w = p.node("embed.w")?;
    let xe = g.matmul(x_in, w)?;
    let ye = g.matmul(y_in, w)?;
    // Rows 0..m are x embeddings, rows m..2m-1 label embeddings; the gather
    // shuffles them into presentation order x1, y1, x2, y2, …, xm.
    let stacked = g.concat(&[xe, ye], 1)?;
    let order: Vec<usize> =
        (0..t).map(|i| if i % 2 == 0 { i / 2 } else { batch.m + (i - 1) / 2 }).collect();
    let seq = g.gather(stacked, 1, order)?;
    let seq = g.add(seq, p.node("embed.b")?)?;
    let pos = match cfg.position_encoding {
        PositionEncoding::Learnable => {
            let table = p.node("pos.table")?;
            g.slice(table, 0, 0, t)?
        }
        PositionEncoding::Sinusoidal => g.input(sinusoidal_table(t, cfg.d_model)),
    };
    g.add(seq, pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitVec;
    use crate::models::bind_params;
    use crate::nn::ParamSet;
    use crate::sampler::{sample_sequence_with_seed, TaskConfig, TaskKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prompt_with(xs: Vec<&str>, ys: Vec<u8>) -> PromptSequence {
        let xs: Vec<BitVec> = xs.into_iter().map(|s| s.parse().unwrap()).collect();
        PromptSequence { xs, ys, teach_len: 0, func: None, seed: 0, task_tag: "test".into() }
    }

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            n: 4,
            d_model: 8,
            max_seq_len: 10,
            ..ModelConfig::transformer(4, 5)
        }
    }

    #[test]
    fn batch_layout_and_validation() {
        let p1 = prompt_with(vec!["1010", "0110", "0001"], vec![1, 0, 1]);
        let p2 = prompt_with(vec!["1111", "0000", "1000"], vec![0, 1, 1]);
        let b: PromptBatch<f32> = PromptBatch::from_prompts(&[p1, p2.clone()]).unwrap();
        assert_eq!((b.batch, b.m, b.n, b.seq_len()), (2, 3, 4, 5));
        assert_eq!(b.x_tokens.shape(), &[2, 3, 4]);
        assert_eq!(b.y_tokens.shape(), &[2, 2, 4]);
        // Prompt 2, point 1 is 1111.
        assert_eq!(&b.x_tokens.data()[12..16], &[1.0, 1.0, 1.0, 1.0]);
        // Lifted labels: only coordinate 0 carries the label.
        assert_eq!(&b.y_tokens.data()[0..4], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(&b.y_tokens.data()[8..12], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.targets, vec![1, 0, 1, 0, 1, 1]);

        let short = prompt_with(vec!["1010"], vec![1]);
        assert!(PromptBatch::<f32>::from_prompts(&[short]).is_err());
        let ragged = prompt_with(vec!["101", "010", "001"], vec![1, 0, 1]);
        assert!(PromptBatch::<f32>::from_prompts(&[p2, ragged]).is_err());
        assert!(PromptBatch::<f32>::from_prompts(&[]).is_err());
    }

    #[test]
    fn repeated_x_differs_only_by_position_row() {
        let cfg = tiny_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params: ParamSet<f64> = cfg.build_params(&mut rng).unwrap();
        // Same point at positions 1 and 3 (token rows 0 and 4).
        let p = prompt_with(vec!["1010", "0110", "1010"], vec![1, 0, 1]);
        let b = PromptBatch::from_prompts(&[p]).unwrap();
        let mut g = Graph::new();
        let bound = bind_params(&mut g, &params);
        let tokens = embed_tokens(&mut g, &bound, &cfg, &b).unwrap();
        let tok = g.value(tokens);
        let d = cfg.d_model;
        let table = params.get("pos.table").unwrap();
        for i in 0..d {
            let diff = (tok.data()[i] - tok.data()[4 * d + i]) as f64;
            let pos_diff = table.data()[i] - table.data()[4 * d + i];
            assert!((diff - pos_diff).abs() < 1e-12, "coordinate {i}");
        }
    }

    #[test]
    fn zero_label_embeds_as_bias_plus_position() {
        let cfg = tiny_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut params: ParamSet<f64> = cfg.build_params(&mut rng).unwrap();
        for v in params.get_mut("embed.b").unwrap().data_mut() {
            *v = 0.25;
        }
        let p = prompt_with(vec!["1010", "0110", "1010"], vec![0, 0, 1]);
        let b = PromptBatch::from_prompts(&[p]).unwrap();
        let mut g = Graph::new();
        let bound = bind_params(&mut g, &params);
        let tokens = embed_tokens(&mut g, &bound, &cfg, &b).unwrap();
        let tok = g.value(tokens);
        let d = cfg.d_model;
        let table = params.get("pos.table").unwrap();
        // y_1 = 0 lives at token position 1: W·0 + bias + pos[1].
        for i in 0..d {
            let expect = 0.25 + table.data()[d + i];
            assert!(((tok.data()[d + i] - expect) as f64).abs() < 1e-12, "coordinate {i}");
        }
    }

    #[test]
    fn sinusoidal_table_is_bounded_and_parameter_free() {
        let cfg = ModelConfig {
            position_encoding: PositionEncoding::Sinusoidal,
            ..tiny_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params: ParamSet<f32> = cfg.build_params(&mut rng).unwrap();
        assert!(!params.contains("pos.table"));
        let t: Tensor<f64> = sinusoidal_table(10, 8);
        assert!(t.data().iter().all(|v| v.abs() <= 1.0));
        // Position 0: sin(0)=0 on even coordinates, cos(0)=1 on odd ones.
        assert_eq!(t.data()[0], 0.0);
        assert_eq!(t.data()[1], 1.0);
        let task = TaskConfig::new(TaskKind::Conjunction, 4, 5);
        let prompts = vec![sample_sequence_with_seed(&task, 3).unwrap()];
        let b = PromptBatch::from_prompts(&prompts).unwrap();
        let mut g: Graph<f32> = Graph::new();
        let bound = bind_params(&mut g, &params);
        let tokens = embed_tokens(&mut g, &bound, &cfg, &b).unwrap();
        assert_eq!(g.value(tokens).shape(), &[1, 9, 8]);
    }

    #[test]
    fn oversized_prompt_is_rejected() {
        let cfg = tiny_cfg(); // max_seq_len 10 fits m <= 5
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let params: ParamSet<f32> = cfg.build_params(&mut rng).unwrap();
        let task = TaskConfig::new(TaskKind::Conjunction, 4, 6);
        let prompts = vec![sample_sequence_with_seed(&task, 3).unwrap()];
        let b = PromptBatch::from_prompts(&prompts).unwrap();
        let mut g: Graph<f32> = Graph::new();
        let bound = bind_params(&mut g, &params);
        assert!(embed_tokens(&mut g, &bound, &cfg, &b).is_err());
        let task = TaskConfig::new(TaskKind::Conjunction, 3, 4);
        let prompts = vec![sample_sequence_with_seed(&task, 3).unwrap()];
        let b: PromptBatch<f32> = PromptBatch::from_prompts(&prompts).unwrap();
        let mut g: Graph<f32> = Graph::new();
        let bound = bind_params(&mut g, &params);
        assert!(matches!(
            embed_tokens(&mut g, &bound, &cfg, &b),
            Err(Error::DimMismatch { expected: 4, got: 3 })
        ));
    }
}
