//! Per-position accuracy evaluation over freshly sampled prompts, for both
//! trained sequence models and classical per-prompt learners.

use serde::{Deserialize, Serialize};

use crate::learners::Learner;
use crate::models::{
    bind_params, forward, predictions_from_logits, ModelConfig, PromptBatch,
};
use crate::nn::{Graph, ParamSet};
use crate::sampler::{derive_seed, sample_sequence_with_seed, PromptSequence, TaskConfig};
use crate::teaching::sample_teach_sequence_with_seed;
use crate::{thread_pool, Error, Result};

/// Evaluation sample size used throughout: accuracy is averaged over this
/// many independently sampled prompts unless a caller overrides it.
pub const DEFAULT_EVAL_PROMPTS: usize = 1280;

/// Anything that can guess every label of a prompt from the preceding
/// examples alone.
pub trait SequencePredictor: Sync {
    /// `out[i][k]` is the prediction for label `k` of prompt `i`, made after
    /// seeing points `1..=k` and labels `1..k`.
    fn predict_prompts(&self, prompts: &[PromptSequence]) -> Result<Vec<Vec<u8>>>;

    /// Identifier recorded in reports.
    fn name(&self) -> String;

    /// Input dimension the predictor is fixed to, if any.
    fn input_dim(&self) -> Option<usize> {
        None
    }
}

/// A trained sequence model plus the batching used to run it.
pub struct ModelPredictor {
    pub config: ModelConfig,
    pub params: ParamSet<f32>,
    /// Prompts per forward pass.
    pub chunk: usize,
    pub label: String,
}

impl ModelPredictor {
    pub fn new(config: ModelConfig, params: ParamSet<f32>, label: impl Into<String>) -> Self {
        Self { config, params, chunk: 64, label: label.into() }
    }
}

impl SequencePredictor for ModelPredictor {
    fn predict_prompts(&self, prompts: &[PromptSequence]) -> Result<Vec<Vec<u8>>> {
        let chunks: Vec<&[PromptSequence]> = prompts.chunks(self.chunk.max(1)).collect();
        let results: Vec<Result<Vec<Vec<u8>>>> = thread_pool().install(|| {
            use rayon::prelude::*;
            chunks
                .par_iter()
                .map(|chunk| {
                    let batch = PromptBatch::<f32>::from_prompts(chunk)?;
                    let mut g = Graph::new();
                    let bound = bind_params(&mut g, &self.params);
                    let out = forward(&mut g, &bound, &self.config, &batch)?;
                    Ok(predictions_from_logits(g.value(out.logits), batch.m))
                })
                .collect()
        });
        let mut all = Vec::with_capacity(prompts.len());
        for r in results {
            all.extend(r?);
        }
        Ok(all)
    }

    fn name(&self) -> String {
        self.label.clone()
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.config.n)
    }
}

/// A classical per-prompt learner run independently on every prompt.
pub struct LearnerPredictor(pub Box<dyn Learner>);

impl SequencePredictor for LearnerPredictor {
    fn predict_prompts(&self, prompts: &[PromptSequence]) -> Result<Vec<Vec<u8>>> {
        Ok(thread_pool().install(|| {
            use rayon::prelude::*;
            prompts
                .par_iter()
                .map(|p| self.0.predict_sequence(&p.xs, &p.ys))
                .collect()
        }))
    }

    fn name(&self) -> String {
        self.0.name()
    }
}

/// Accuracy at one (relative) prompt position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionStat {
    /// 1-based point index; for teach reports, 1-based index after the
    /// teaching block.
    pub position: usize,
    /// In-context examples seen before this prediction (for teach reports:
    /// examples after the teaching block).
    pub k_examples: usize,
    pub accuracy: f64,
    /// Binomial standard error over `count` prompts.
    pub stderr: f64,
    /// Prompts contributing to this row.
    pub count: usize,
}

/// One evaluation: the accuracy curve plus its headline numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Task identifier (sampler tag).
    pub task: String,
    /// Predictor identifier.
    pub model: String,
    pub n_eval: usize,
    pub eval_seed: u64,
    /// True when rows are indexed relative to the end of a teaching block.
    pub teach_relative: bool,
    pub per_position: Vec<PositionStat>,
    /// Accuracy at the final point of the prompt.
    pub last_point: f64,
    /// Unweighted mean of the per-position accuracies.
    pub mean_over_positions: f64,
}

fn binomial_stderr(p: f64, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / count as f64).sqrt()
}

fn aggregate(
    task: String,
    model: String,
    n_eval: usize,
    eval_seed: u64,
    teach_relative: bool,
    rows: Vec<(usize, usize, usize, usize)>, // (position, k_examples, correct, count)
) -> EvalReport {
    let per_position: Vec<PositionStat> = rows
        .into_iter()
        .map(|(position, k_examples, correct, count)| {
            let accuracy = if count == 0 { 0.0 } else { correct as f64 / count as f64 };
            PositionStat {
                position,
                k_examples,
                accuracy,
                stderr: binomial_stderr(accuracy, count),
                count,
            }
        })
        .collect();
    let last_point = per_position.last().map_or(0.0, |s| s.accuracy);
    let mean_over_positions = if per_position.is_empty() {
        0.0
    } else {
        per_position.iter().map(|s| s.accuracy).sum::<f64>() / per_position.len() as f64
    };
    EvalReport {
        task,
        model,
        n_eval,
        eval_seed,
        teach_relative,
        per_position,
        last_point,
        mean_over_positions,
    }
}

fn check_dims(predictor: &dyn SequencePredictor, cfg: &TaskConfig) -> Result<()> {
    if let Some(dim) = predictor.input_dim() {
        if dim != cfg.n {
            return Err(Error::DimMismatch { expected: dim, got: cfg.n });
        }
    }
    Ok(())
}

/// Deterministic fresh prompts for an evaluation: element `i` depends only on
/// `(seed, i)` and the config.
fn eval_prompts<F>(n_eval: usize, sample: F) -> Result<Vec<PromptSequence>>
where
    F: Fn(u64) -> Result<PromptSequence>,
{
    (0..n_eval as u64).map(sample).collect()
}

/// Per-position correct/count rows for equal-length prompts.
fn uniform_rows(
    prompts: &[PromptSequence],
    predictions: &[Vec<u8>],
    m: usize,
) -> Result<Vec<(usize, usize, usize, usize)>> {
    let mut rows: Vec<(usize, usize, usize, usize)> =
        (1..=m).map(|k| (k, k - 1, 0, 0)).collect();
    for (p, preds) in prompts.iter().zip(predictions) {
        if preds.len() != m {
            return Err(Error::invalid(
                "evaluation",
                format!("predictor returned {} guesses for an {m}-point prompt", preds.len()),
            ));
        }
        for k in 0..m {
            rows[k].3 += 1;
            if preds[k] == p.ys[k] {
                rows[k].2 += 1;
            }
        }
    }
    Ok(rows)
}

/// Per-position accuracy of `predictor` over `n_eval` fresh prompts of the
/// task. Deterministic given `eval_seed`.
pub fn evaluate(
    predictor: &dyn SequencePredictor,
    cfg: &TaskConfig,
    n_eval: usize,
    eval_seed: u64,
) -> Result<EvalReport> {
    check_dims(predictor, cfg)?;
    cfg.validate()?;
    let prompts =
        eval_prompts(n_eval, |i| sample_sequence_with_seed(cfg, derive_seed(eval_seed, i)))?;
    let predictions = predictor.predict_prompts(&prompts)?;
    let rows = uniform_rows(&prompts, &predictions, cfg.m)?;
    Ok(aggregate(cfg.task.tag().to_string(), predictor.name(), n_eval, eval_seed, false, rows))
}

/// Per-position accuracy over prompts the caller already has (for example a
/// dataset read from disk). All prompts must have the same length; the
/// recorded eval seed is 0 because no sampling happened here.
pub fn evaluate_on(
    predictor: &dyn SequencePredictor,
    prompts: &[PromptSequence],
) -> Result<EvalReport> {
    let first = prompts
        .first()
        .ok_or_else(|| Error::invalid("evaluation", "no prompts given".to_string()))?;
    let m = first.len();
    if let Some(bad) = prompts.iter().find(|p| p.len() != m) {
        return Err(Error::invalid(
            "evaluation",
            format!("prompt lengths differ: {} vs {m}", bad.len()),
        ));
    }
    if let Some(dim) = predictor.input_dim() {
        let n = first.xs.first().map_or(0, |x| x.len());
        if dim != n {
            return Err(Error::DimMismatch { expected: dim, got: n });
        }
    }
    let predictions = predictor.predict_prompts(prompts)?;
    let rows = uniform_rows(prompts, &predictions, m)?;
    Ok(aggregate(first.task_tag.clone(), predictor.name(), prompts.len(), 0, false, rows))
}

/// Accuracy on teach-prefixed prompts, restricted to the positions after the
/// teaching block and indexed relative to its end: row `position = r` pools
/// the predictions made at absolute point `teach_len + r` of each prompt
/// (teaching blocks vary in length across functions).
pub fn evaluate_teach(
    predictor: &dyn SequencePredictor,
    cfg: &TaskConfig,
    n_eval: usize,
    eval_seed: u64,
) -> Result<EvalReport> {
    check_dims(predictor, cfg)?;
    cfg.validate()?;
    let prompts =
        eval_prompts(n_eval, |i| sample_teach_sequence_with_seed(cfg, derive_seed(eval_seed, i)))?;
    let predictions = predictor.predict_prompts(&prompts)?;
    let m = cfg.m;
    let max_tail = prompts.iter().map(|p| m - p.teach_len).max().unwrap_or(0);
    let mut rows: Vec<(usize, usize, usize, usize)> =
        (1..=max_tail).map(|r| (r, r - 1, 0, 0)).collect();
    for (p, preds) in prompts.iter().zip(&predictions) {
        if preds.len() != m {
            return Err(Error::invalid(
                "evaluation",
                format!("predictor returned {} guesses for an {m}-point prompt", preds.len()),
            ));
        }
        for (r, (pred, y)) in preds[p.teach_len..].iter().zip(&p.ys[p.teach_len..]).enumerate() {
            rows[r].3 += 1;
            if pred == y {
                rows[r].2 += 1;
            }
        }
    }
    Ok(aggregate(cfg.task.tag().to_string(), predictor.name(), n_eval, eval_seed, true, rows))
}

/// Evaluate a predictor on a task it was not trained on (transfer /
/// out-of-distribution protocol). Identical to [`evaluate`] on the target
/// config once dimensions are checked, so identity transfer reproduces
/// [`evaluate`] exactly.
pub fn cross_evaluate(
    predictor: &dyn SequencePredictor,
    target: &TaskConfig,
    n_eval: usize,
    eval_seed: u64,
) -> Result<EvalReport> {
    evaluate(predictor, target, n_eval, eval_seed)
}
