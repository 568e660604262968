//! Finite-sample study: how accuracy depends on the number of distinct
//! training sequences.
//!
//! Each grid cell pins a pool of `N` pre-sampled sequences, trains a fresh
//! model whose batches are drawn from that pool with replacement, and then
//! evaluates on freshly sampled prompts (never the pool). The reported metric
//! is the mean over prompts of the per-prompt mean-over-positions accuracy,
//! with its standard error taken across prompts.

use super::eval::{ModelPredictor, SequencePredictor};
use super::train::{train, TrainRun};
use crate::sampler::{derive_seed, make_pool, sample_sequence_with_seed};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Pool sizes of the standard study grid.
pub const STUDY_POOL_GRID: [usize; 7] = [128, 512, 1024, 2048, 4096, 8192, 16384];

/// One trained-and-evaluated cell of the study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    /// Distinct training sequences available to this cell.
    pub pool_size: usize,
    /// Input dimension of the task.
    pub n: usize,
    /// Mean over eval prompts of the per-prompt mean-over-positions accuracy.
    pub mean_accuracy: f64,
    /// Standard error of that mean across eval prompts.
    pub stderr: f64,
}

/// Run `base` once per pool size, always evaluating on fresh prompts.
///
/// `base.pool` is ignored; each cell installs its own pool seeded from
/// `(base.seed, pool_size)` so cells share the parameter initialization and
/// differ only in the data they may revisit.
pub fn finite_sample_study(
    base: &TrainRun,
    pool_sizes: &[usize],
    n_eval: usize,
    eval_seed: u64,
) -> Result<Vec<StudyCell>> {
    let mut cells = Vec::with_capacity(pool_sizes.len());
    for &pool_size in pool_sizes {
        let mut run = base.clone();
        run.pool = Some(make_pool(&base.task, pool_size, derive_seed(base.seed, pool_size as u64))?);
        let outcome = train(&run)?;
        let predictor = ModelPredictor::new(
            run.model.clone(),
            outcome.params,
            format!("pool-{pool_size}"),
        );

        let prompts = (0..n_eval as u64)
            .map(|i| sample_sequence_with_seed(&base.task, derive_seed(eval_seed, i)))
            .collect::<Result<Vec<_>>>()?;
        let predictions = predictor.predict_prompts(&prompts)?;
        let per_prompt: Vec<f64> = prompts
            .iter()
            .zip(&predictions)
            .map(|(p, pred)| {
                let correct = p.ys.iter().zip(pred).filter(|(y, g)| y == g).count();
                correct as f64 / p.ys.len() as f64
            })
            .collect();
        let k = per_prompt.len() as f64;
        let mean = per_prompt.iter().sum::<f64>() / k;
        let var = per_prompt.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / k;
        cells.push(StudyCell {
            pool_size,
            n: base.task.n,
            mean_accuracy: mean,
            stderr: (var / k).sqrt(),
        });
    }
    Ok(cells)
}
