//! Training loop: streamed prompt batches, Adam updates, and a loss trace.
//!
//! Each training step draws a fresh batch of prompt sequences (a new hidden
//! function and new inputs per sequence) unless the run pins a finite
//! [`SequencePool`], in which case batches are resampled from the pool with
//! replacement. Label noise, when enabled, is applied to the drawn sequences
//! on every step, so pooled runs see fresh noise on each draw of the same
//! underlying sequence.

use crate::models::{
    bind_params, collect_grads, forward, sequence_loss, ModelConfig, PromptBatch,
};
use crate::nn::{Adam, Graph, ParamSet, Scalar};
use crate::sampler::{
    apply_label_noise, derive_seed, draw_from_pool, sample_sequence_with_seed, stream_rng,
    PromptSequence, SequencePool, TaskConfig,
};
use crate::teaching::{sample_mixture_with_seed, sample_teach_sequence_with_seed};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Default prompts per optimizer step.
pub const DEFAULT_BATCH_SIZE: usize = 64;
/// Default trace cadence (steps between recorded loss/grad-norm rows).
pub const DEFAULT_TRACE_EVERY: usize = 100;
/// Teach-sequence probability used by [`PromptMode::Mixture`].
pub const MIXTURE_TEACH_PROB: f64 = 0.5;

/// How training prompts are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    /// Uniform random example sequences.
    Vanilla,
    /// Every sequence opens with the sampled function's teaching set.
    Teach,
    /// Each sequence is a fair coin flip between the two modes above.
    Mixture,
}

/// Everything needed to reproduce one training run.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub task: TaskConfig,
    pub model: ModelConfig,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Finite sample pool; when set, every batch is drawn from it with
    /// replacement and `mode` is ignored (pools hold plain sequences).
    pub pool: Option<SequencePool>,
    /// Per-label flip probability applied to drawn training sequences.
    pub noise_rate: f64,
    pub mode: PromptMode,
    /// Record a trace row every this many steps (step 0 and the final step
    /// are always recorded).
    pub trace_every: usize,
}

impl TrainRun {
    pub fn new(task: TaskConfig, model: ModelConfig, steps: usize, lr: f64, seed: u64) -> Self {
        TrainRun {
            task,
            model,
            steps,
            batch_size: DEFAULT_BATCH_SIZE,
            lr,
            seed,
            pool: None,
            noise_rate: 0.0,
            mode: PromptMode::Vanilla,
            trace_every: DEFAULT_TRACE_EVERY,
        }
    }
}

/// One recorded point of the training trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Final parameters — or, on abort, the last finite state.
    pub params: ParamSet<f32>,
    pub trace: Vec<TraceRow>,
    /// Steps whose update was actually applied.
    pub completed_steps: usize,
    /// `Some(reason)` when the run stopped early on a non-finite loss or
    /// gradient; `params` then holds the state from before the bad step.
    pub aborted: Option<String>,
    pub wall_secs: f64,
}

/// Train a fresh model described by `run`.
pub fn train(run: &TrainRun) -> Result<TrainOutcome> {
    train_with(run, None)
}

/// Train starting from `initial` parameters when given (shapes and names must
/// match the model config), otherwise from a seeded random initialization.
///
/// Seed streams: stream 0 of `run.seed` initializes parameters, stream 1
/// drives pool draws and label noise, and the sequence sampled at position
/// `i` of step `s` uses `derive_seed(run.seed, 2 + s * batch_size + i)`, so
/// any single training sequence can be reconstructed offline.
pub fn train_with(run: &TrainRun, initial: Option<ParamSet<f32>>) -> Result<TrainOutcome> {
    run.task.validate()?;
    run.model.validate()?;
    if run.model.n != run.task.n {
        return Err(Error::invalid(
            "train run",
            format!("model expects {}-bit inputs but task has n={}", run.model.n, run.task.n),
        ));
    }
    let seq_len = ModelConfig::seq_len(run.task.m);
    if seq_len > run.model.max_seq_len {
        return Err(Error::invalid(
            "train run",
            format!(
                "task needs sequence length {seq_len} but model caps at {}",
                run.model.max_seq_len
            ),
        ));
    }
    if run.batch_size == 0 || run.steps == 0 {
        return Err(Error::invalid("train run", "steps and batch_size must be nonzero".to_string()));
    }
    if run.trace_every == 0 {
        return Err(Error::invalid("train run", "trace_every must be nonzero".to_string()));
    }

    let start = Instant::now();
    let mut params: ParamSet<f32> = match initial {
        Some(p) => p,
        None => run.model.build_params(&mut stream_rng(run.seed, 0))?,
    };
    let mut aux_rng = stream_rng(run.seed, 1);
    let mut opt: Adam<f32> = Adam::new(run.lr);
    let mut trace = Vec::new();
    let mut completed_steps = 0;
    let mut aborted = None;

    for step in 0..run.steps {
        let mut prompts: Vec<PromptSequence> = match &run.pool {
            Some(pool) => draw_from_pool(pool, run.batch_size, &mut aux_rng),
            None => (0..run.batch_size)
                .map(|i| {
                    let seq_seed =
                        derive_seed(run.seed, 2 + (step * run.batch_size + i) as u64);
                    match run.mode {
                        PromptMode::Vanilla => sample_sequence_with_seed(&run.task, seq_seed),
                        PromptMode::Teach => sample_teach_sequence_with_seed(&run.task, seq_seed),
                        PromptMode::Mixture => {
                            sample_mixture_with_seed(&run.task, MIXTURE_TEACH_PROB, seq_seed)
                        }
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        for seq in &mut prompts {
            apply_label_noise(seq, run.noise_rate, &mut aux_rng);
        }
        let batch = PromptBatch::<f32>::from_prompts(&prompts)?;

        let mut g: Graph<f32> = Graph::new();
        let bound = bind_params(&mut g, &params);
        let out = forward(&mut g, &bound, &run.model, &batch)?;
        let loss_id = sequence_loss(&mut g, out.logits, &batch)?;
        let loss = g.value(loss_id).data()[0].to_f64();
        if !loss.is_finite() {
            aborted = Some(format!("non-finite loss {loss} at step {step}"));
            break;
        }
        g.backward(loss_id)?;
        let grads = collect_grads(&g, &bound);
        // Sum in parameter declaration order so the recorded norm is
        // reproducible bit for bit across runs.
        let grad_norm = params
            .names()
            .filter_map(|name| grads.get(name))
            .map(|t| t.data().iter().map(|&v| v.to_f64() * v.to_f64()).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if !grad_norm.is_finite() {
            aborted = Some(format!("non-finite gradient norm at step {step}"));
            break;
        }
        if step % run.trace_every == 0 || step + 1 == run.steps {
            trace.push(TraceRow { step, loss, grad_norm });
        }
        opt.apply(&mut params, &grads)?;
        completed_steps = step + 1;
    }

    Ok(TrainOutcome { params, trace, completed_steps, aborted, wall_secs: start.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{make_pool, TaskKind};

    fn tiny_run() -> TrainRun {
        let task = TaskConfig::new(TaskKind::Conjunction, 4, 6);
        let mut model = ModelConfig::transformer(4, 6);
        model.d_model = 8;
        model.n_layers = 1;
        model.n_heads = 2;
        let mut run = TrainRun::new(task, model, 8, 1e-2, 11);
        run.batch_size = 8;
        run.trace_every = 5;
        run
    }

    #[test]
    fn loss_collapses_on_a_single_function_class() {
        // Par(2,2) holds one function, so every prompt shares the same
        // input-to-label mapping and a tiny model can drive the loss toward
        // zero quickly — a clean end-to-end check of the update loop.
        let mut task = TaskConfig::new(TaskKind::SparseParity, 2, 4);
        task.sparsity = 2;
        let mut model = ModelConfig::transformer(2, 4);
        model.d_model = 8;
        model.n_layers = 1;
        model.n_heads = 2;
        let mut run = TrainRun::new(task, model, 200, 1e-2, 11);
        run.batch_size = 8;
        run.trace_every = 50;
        let out = train(&run).unwrap();
        assert!(out.aborted.is_none());
        assert_eq!(out.completed_steps, 200);
        let first = out.trace.first().unwrap();
        let last = out.trace.last().unwrap();
        assert_eq!(first.step, 0);
        assert!((0.6..0.8).contains(&first.loss), "init loss {first:?}");
        assert!(last.loss < 0.1, "final loss {last:?}");
        assert!(out.wall_secs > 0.0);
    }

    #[test]
    fn trace_cadence_covers_step_zero_and_final_step() {
        let mut run = tiny_run();
        run.steps = 7;
        run.trace_every = 3;
        let out = train(&run).unwrap();
        let steps: Vec<usize> = out.trace.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 3, 6]);
    }

    #[test]
    fn same_seed_reproduces_parameters_bit_for_bit() {
        let run = {
            let mut r = tiny_run();
            r.steps = 6;
            r
        };
        let a = train(&run).unwrap();
        let b = train(&run).unwrap();
        assert_eq!(a.trace, b.trace);
        for ((na, ta), (nb, tb)) in a.params.iter().zip(b.params.iter()) {
            assert_eq!(na, nb);
            let bits_a: Vec<u32> = ta.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = tb.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "parameter {na} diverged");
        }
    }

    #[test]
    fn non_finite_loss_aborts_and_returns_the_given_state() {
        let run = tiny_run();
        let mut initial = run.model.build_params::<f32>(&mut stream_rng(99, 0)).unwrap();
        initial.get_mut("embed.w").unwrap().data_mut()[0] = f32::NAN;
        let out = train_with(&run, Some(initial.clone())).unwrap();
        assert_eq!(out.completed_steps, 0);
        let reason = out.aborted.expect("run must abort");
        assert!(reason.contains("step 0"), "unexpected reason: {reason}");
        // The returned state is exactly the injected one: nothing was updated.
        for ((name, got), (_, want)) in out.params.iter().zip(initial.iter()) {
            let got_bits: Vec<u32> = got.data().iter().map(|v| v.to_bits()).collect();
            let want_bits: Vec<u32> = want.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(got_bits, want_bits, "parameter {name} changed despite abort");
        }
        assert!(out.trace.is_empty());
    }

    #[test]
    fn pool_noise_and_prompt_modes_run_clean() {
        let mut run = tiny_run();
        run.steps = 3;
        run.pool = Some(make_pool(&run.task, 5, 7).unwrap());
        run.noise_rate = 0.2;
        assert!(train(&run).unwrap().aborted.is_none());

        let mut teach = tiny_run();
        teach.steps = 2;
        teach.mode = PromptMode::Teach;
        assert!(train(&teach).unwrap().aborted.is_none());

        let mut mix = tiny_run();
        mix.steps = 2;
        mix.mode = PromptMode::Mixture;
        assert!(train(&mix).unwrap().aborted.is_none());
    }

    #[test]
    fn invalid_runs_are_rejected() {
        let mut run = tiny_run();
        run.model.n = 5;
        assert!(train(&run).is_err());

        let mut run = tiny_run();
        run.model.max_seq_len = 3;
        assert!(train(&run).is_err());

        let mut run = tiny_run();
        run.steps = 0;
        assert!(train(&run).is_err());
    }
}
