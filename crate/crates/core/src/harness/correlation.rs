//! Pairwise-correlation estimator: how similar two random functions from a
//! class look on uniform inputs.
//!
//! Functions are mapped to ±1 outputs. For an i.i.d. pair `(f1, f2)` the
//! pair correlation is the input-average of `f1(x)·f2(x)` over a shared
//! uniform input sample; the class estimate is the absolute value of the
//! mean over pairs, with a bootstrap-over-pairs standard error. Classes whose
//! members agree often (conjunctions are mostly-0 functions) score near 1,
//! while parities are pairwise orthogonal and score near 0 — a cheap proxy
//! for how much signal a sequence model can extract early in training.

use crate::bits::BitVec;
use crate::boolfn;
use crate::sampler::{sample_function, stream_rng, TaskConfig, TaskKind};
use crate::{thread_pool, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Bootstrap resamples used for the standard error.
const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Point estimate of a class's pairwise correlation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    /// `|mean over pairs of mean over inputs of f1·f2|`, in `[0, 1]`.
    pub estimate: f64,
    /// Bootstrap standard error of the pair mean.
    pub stderr: f64,
    pub n_functions: usize,
    pub n_inputs: usize,
    /// Disjoint pairs actually formed (`n_functions / 2`).
    pub n_pairs: usize,
    pub task: String,
}

/// Estimate the pairwise correlation of `cfg`'s function class from
/// `n_functions` sampled functions (paired up disjointly) evaluated on a
/// shared sample of `n_inputs` uniform inputs. Deterministic given `seed`.
pub fn pairwise_correlation(
    cfg: &TaskConfig,
    n_functions: usize,
    n_inputs: usize,
    seed: u64,
) -> Result<CorrelationEstimate> {
    cfg.validate()?;
    if cfg.task == TaskKind::NearestNeighbor {
        return Err(Error::invalid(
            "correlation",
            "the nearest-neighbor task has no generator functions to correlate".to_string(),
        ));
    }
    if n_functions < 2 || n_inputs == 0 {
        return Err(Error::invalid(
            "correlation",
            "need at least two functions and one input".to_string(),
        ));
    }

    // Stream 0: the shared input sample. Streams 1..: one per function, so
    // any single function can be re-drawn in isolation.
    let mut input_rng = stream_rng(seed, 0);
    let inputs: Vec<BitVec> = (0..n_inputs).map(|_| BitVec::uniform(cfg.n, &mut input_rng)).collect();
    let functions = (0..n_functions)
        .map(|i| sample_function(cfg, &mut stream_rng(seed, 1 + i as u64)))
        .collect::<Result<Vec<_>>>()?;

    // Integer agreement sums keep the singleton-class case exact: a pair of
    // identical functions contributes exactly n_inputs, and the final mean of
    // exact 1.0 values is exactly 1.0.
    let pairs: Vec<&[boolfn::FunctionSpec]> = functions.chunks_exact(2).collect();
    let pair_corr: Vec<f64> = thread_pool().install(|| {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|pair| {
                let mut sum: i64 = 0;
                for x in &inputs {
                    let a = boolfn::evaluate(&pair[0], x)?;
                    let b = boolfn::evaluate(&pair[1], x)?;
                    sum += if a == b { 1 } else { -1 };
                }
                Ok(sum as f64 / n_inputs as f64)
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let n_pairs = pair_corr.len();
    let mean = pair_corr.iter().sum::<f64>() / n_pairs as f64;

    let mut boot_rng = stream_rng(seed, 1 + n_functions as u64);
    let mut resample_means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let s: f64 =
            (0..n_pairs).map(|_| pair_corr[boot_rng.gen_range(0..n_pairs)]).sum();
        resample_means.push(s / n_pairs as f64);
    }
    let boot_mean = resample_means.iter().sum::<f64>() / BOOTSTRAP_RESAMPLES as f64;
    let stderr = (resample_means.iter().map(|v| (v - boot_mean).powi(2)).sum::<f64>()
        / BOOTSTRAP_RESAMPLES as f64)
        .sqrt();

    Ok(CorrelationEstimate {
        estimate: mean.abs(),
        stderr,
        n_functions,
        n_inputs,
        n_pairs,
        task: cfg.task.tag().to_string(),
    })
}
