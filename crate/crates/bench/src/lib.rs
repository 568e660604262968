//! Shared fixtures for the criterion benchmarks.

use boolicl::models::ModelConfig;
use boolicl::nn::ParamSet;
use boolicl::sampler::{derive_seed, sample_sequence_with_seed, stream_rng, TaskConfig};
use boolicl::PromptSequence;

/// Deterministic batch of vanilla prompts for `cfg`.
pub fn prompts(cfg: &TaskConfig, count: usize, seed: u64) -> Vec<PromptSequence> {
    (0..count as u64)
        .map(|i| sample_sequence_with_seed(cfg, derive_seed(seed, i)).expect("valid config"))
        .collect()
}

/// Freshly initialised parameters for `cfg`, seeded deterministically.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> ParamSet<f32> {
    cfg.build_params(&mut stream_rng(seed, 0)).expect("valid config")
}
