//! Nearest-neighbor attention-head score: how much attention mass a head
//! places, when predicting the label of point `x_k`, on the label token of
//! the cosine-nearest earlier point.

use crate::bits::cmp_cosine;
use crate::sampler::PromptSequence;
use crate::{Error, Result};

use super::{AttentionRecord, ModelConfig};
use crate::nn::Scalar;

/// Per-head score in `[0, 1]`; heads above 0.5 behave like nearest-neighbor
/// lookups. `approximate` flags prompts too short for the usual 40-query
/// window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadScore {
    pub layer: usize,
    pub head: usize,
    pub score: f64,
    pub approximate: bool,
}

/// For each attention head: average, over the query positions of the last 40
/// x-tokens (those with at least one preceding example), the weight placed on
/// the y-token of the cosine-nearest earlier x. Cosine ties resolve to the
/// earliest point. Prompts with fewer than 41 points are scored over every
/// available query position and flagged approximate.
pub fn nn_head_scores<S: Scalar>(
    record: &AttentionRecord<S>,
    prompts: &[PromptSequence],
) -> Result<Vec<HeadScore>> {
    let first = prompts
        .first()
        .ok_or_else(|| Error::invalid("nn head score", "no prompts given".to_string()))?;
    let m = first.xs.len();
    if m < 2 {
        return Err(Error::invalid("nn head score", "prompts need at least 2 points".to_string()));
    }
    if prompts.iter().any(|p| p.xs.len() != m) {
        return Err(Error::invalid("nn head score", "prompts have mixed lengths".to_string()));
    }
    let t = ModelConfig::seq_len(m);
    // 1-indexed point numbers scored: the last 40 points that have a
    // predecessor, or all of them when the prompt is shorter.
    let first_k = if m >= 41 { m - 39 } else { 2 };
    let approximate = m < 41;

    // Column of the nearest neighbor's label token, per prompt and scored k.
    let mut target_cols: Vec<Vec<usize>> = Vec::with_capacity(prompts.len());
    for p in prompts {
        let mut cols = Vec::with_capacity(m - first_k + 1);
        for k in first_k..=m {
            let query = &p.xs[k - 1];
            let mut best = (0usize, 0u64, 0u64); // (index j, dot, |x_j| squared)
            for j in 1..k {
                let cand = &p.xs[j - 1];
                let dot = query.dot(cand);
                // Bits are 0/1, so the squared L2 norm is the popcount.
                let norm2 = cand.ones() as u64;
                // Strict improvement only: equal similarity keeps earliest j.
                if j == 1
                    || cmp_cosine(dot, norm2, best.1, best.2) == std::cmp::Ordering::Greater
                {
                    best = (j, dot, norm2);
                }
            }
            // Point j's label token sits at interleaved position 2j - 1.
            cols.push(2 * best.0 - 1);
        }
        target_cols.push(cols);
    }

    let mut scores = Vec::new();
    for (layer, heads) in record.layers.iter().enumerate() {
        for (head, att) in heads.iter().enumerate() {
            let shape = att.shape();
            if shape != [prompts.len(), t, t] {
                return Err(Error::invalid(
                    "nn head score",
                    format!(
                        "attention shape {shape:?} does not match {} prompts of {t} tokens",
                        prompts.len()
                    ),
                ));
            }
            let data = att.data();
            let mut total = 0.0f64;
            let mut count = 0usize;
            for (b, cols) in target_cols.iter().enumerate() {
                for (offset, &col) in cols.iter().enumerate() {
                    let k = first_k + offset;
                    let query_row = 2 * (k - 1);
                    total += data[(b * t + query_row) * t + col].to_f64();
                    count += 1;
                }
            }
            scores.push(HeadScore { layer, head, score: total / count as f64, approximate });
        }
    }
    Ok(scores)
}
