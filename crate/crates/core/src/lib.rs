//! `boolicl` is a testbed for studying in-context learning of Boolean
//! functions. A "task" is a distribution over Boolean functions together with
//! an input distribution; a "prompt" is a sequence of labeled points from one
//! sampled function. The crate provides:
//!
//! - the function classes themselves, with exhaustive enumeration and
//!   consistency oracles for small dimensions ([`boolfn`]),
//! - prompt samplers, balancing, label noise, and finite pools ([`sampler`]),
//! - minimal teaching sequences that pin down a function within its class
//!   ([`teaching`]),
//! - classical baseline learners and exact oracles: averaging, nearest
//!   neighbors, PAC elimination, GF(2) Gaussian elimination ([`learners`]),
//! - a small dense-tensor reverse-mode autodiff core with Adam ([`nn`]),
//! - trainable sequence models: a decoder-only causal transformer and an
//!   LSTM, plus a per-prompt gradient-descent FFN baseline ([`models`]),
//! - meta-training and evaluation harnesses with CSV/JSON reporting
//!   ([`harness`]) and a JSONL dataset format ([`dataset`]).

pub mod bits;
pub mod boolfn;
pub mod dataset;
pub mod harness;
pub mod learners;
pub mod models;
pub mod nn;
pub mod sampler;
pub mod teaching;

pub use bits::{BitVec, SignVec};
pub use boolfn::{evaluate, FunctionClass, FunctionKind, FunctionSpec, Literal};
pub use learners::{Gf2System, Learner};
pub use sampler::{PromptSequence, SequencePool, TaskConfig, TaskKind};
pub use teaching::TeachingSequence;

use once_cell::sync::Lazy;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("enumerating this class would produce {size} functions (limit {limit})")]
    EnumerationTooLarge { size: u128, limit: u128 },
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },
    #[error("{0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }
}

/// Worker-thread cap: `BOOLICL_THREADS` if set, otherwise the number of
/// available CPUs.
pub fn max_threads() -> usize {
    static N: Lazy<usize> = Lazy::new(|| {
        std::env::var("BOOLICL_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            })
    });
    *N
}

/// Shared rayon pool sized by [`max_threads`]. Evaluation parallelizes over
/// prompts through this pool; training itself is sequential over steps.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: Lazy<rayon::ThreadPool> = Lazy::new(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(max_threads())
            .build()
            .expect("failed to build worker pool")
    });
    &POOL
}
