//! Meta-training and evaluation harness: the training loop over freshly
//! sampled prompt batches, per-position accuracy evaluation (including
//! teach-prefixed and cross-task protocols), the pairwise-correlation
//! estimator, the finite-sample study, and CSV/JSON/run-directory reporting.

mod correlation;
mod eval;
mod report;
mod study;
mod train;

pub use correlation::{pairwise_correlation, CorrelationEstimate};
pub use eval::{
    cross_evaluate, evaluate, evaluate_on, evaluate_teach, EvalReport, LearnerPredictor,
    ModelPredictor, PositionStat, SequencePredictor, DEFAULT_EVAL_PROMPTS,
};
pub use report::{
    create_run_dir, curve_csv_string, git_hash, summary_json_string, trace_csv_string,
    write_manifest, write_string, RunManifest, SummaryRow, RUN_MANIFEST_FORMAT,
};
pub use study::{finite_sample_study, StudyCell, STUDY_POOL_GRID};
pub use train::{
    train, train_with, PromptMode, TraceRow, TrainOutcome, TrainRun, DEFAULT_BATCH_SIZE,
    DEFAULT_TRACE_EVERY, MIXTURE_TEACH_PROB,
};
