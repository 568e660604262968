//! Task distributions and prompt assembly: sampling functions and uniform
//! inputs, the minority-class balancing rewrite, sequence-level
//! nearest-neighbor labeling, label noise, and fixed finite pools of
//! sequences for limited-diversity training.

use crate::bits::{cmp_cosine, BitVec};
use crate::boolfn::{evaluate, FunctionKind, FunctionSpec, Literal};
use crate::{Error, Result};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// The deterministic generator used everywhere randomness is needed.
pub type TaskRng = rand_chacha::ChaCha8Rng;

/// Derive an independent 64-bit stream seed from a master seed and a stream
/// index (splitmix64 finalizer). Used to give every sequence, run, and pool
/// element its own reproducible generator.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one derived stream.
pub fn stream_rng(master: u64, index: u64) -> TaskRng {
    TaskRng::seed_from_u64(derive_seed(master, index))
}

/// The task families the testbed can generate prompts for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Conjunction,
    Disjunction,
    SparseDisjunction,
    Dnf3,
    Cnf3,
    Parity,
    SparseParity,
    Majority,
    ThresholdZeroOne,
    IntegerHalfspace,
    NearestNeighbor,
}

impl TaskKind {
    pub const ALL: [TaskKind; 11] = [
        TaskKind::Conjunction,
        TaskKind::Disjunction,
        TaskKind::SparseDisjunction,
        TaskKind::Dnf3,
        TaskKind::Cnf3,
        TaskKind::Parity,
        TaskKind::SparseParity,
        TaskKind::Majority,
        TaskKind::ThresholdZeroOne,
        TaskKind::IntegerHalfspace,
        TaskKind::NearestNeighbor,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            TaskKind::Conjunction => "conjunction",
            TaskKind::Disjunction => "disjunction",
            TaskKind::SparseDisjunction => "sparse_disjunction",
            TaskKind::Dnf3 => "dnf3",
            TaskKind::Cnf3 => "cnf3",
            TaskKind::Parity => "parity",
            TaskKind::SparseParity => "sparse_parity",
            TaskKind::Majority => "majority",
            TaskKind::ThresholdZeroOne => "threshold01",
            TaskKind::IntegerHalfspace => "integer_halfspace",
            TaskKind::NearestNeighbor => "nearest_neighbor",
        }
    }

    /// Label forced onto rewritten points when balancing applies to this
    /// task, or `None` when the task has no balancing recipe.
    pub fn balance_target(&self) -> Option<u8> {
        match self {
            TaskKind::Conjunction | TaskKind::Cnf3 => Some(1),
            TaskKind::Disjunction | TaskKind::SparseDisjunction | TaskKind::Dnf3 => Some(0),
            _ => None,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "conjunction" | "conj" => TaskKind::Conjunction,
            "disjunction" | "disj" => TaskKind::Disjunction,
            "sparse_disjunction" | "sparse-disj" => TaskKind::SparseDisjunction,
            "dnf3" | "dnf" => TaskKind::Dnf3,
            "cnf3" | "cnf" => TaskKind::Cnf3,
            "parity" => TaskKind::Parity,
            "sparse_parity" | "sparse-parity" => TaskKind::SparseParity,
            "majority" => TaskKind::Majority,
            "threshold01" | "threshold" => TaskKind::ThresholdZeroOne,
            "integer_halfspace" | "int-halfspace" => TaskKind::IntegerHalfspace,
            "nearest_neighbor" | "nn" => TaskKind::NearestNeighbor,
            other => return Err(Error::Parse(format!("unknown task {other:?}"))),
        };
        Ok(kind)
    }
}

impl Serialize for TaskKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for TaskKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything needed to sample one task's prompts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub task: TaskKind,
    /// Input dimension.
    pub n: usize,
    /// Points per prompt.
    pub m: usize,
    /// Per-literal (or per-index) inclusion probability for the classes
    /// sampled literal-by-literal.
    pub literal_prob: f64,
    /// Fraction of points rewritten toward the minority label; 0 disables.
    pub balance_fraction: f64,
    /// Per-label flip probability applied to training prompts.
    pub noise_rate: f64,
    /// `k` for the sparse classes (max literals / relevant-set size).
    pub sparsity: usize,
    /// Threshold bias range `[-bias_bound, bias_bound]`.
    pub bias_bound: i32,
    /// Halfspace weight range `[-weight_bound, weight_bound]`.
    pub weight_bound: i32,
    /// Length of the uniformly labeled prefix of the nearest-neighbor task.
    pub seed_len: usize,
    /// Literal probability override for out-of-distribution function
    /// evaluation; `None` means "same distribution as training".
    pub ood_literal_prob: Option<f64>,
    /// Permute points within the teaching block (ablation; canonical order
    /// otherwise).
    #[serde(default)]
    pub shuffle_teach: bool,
}

impl TaskConfig {
    /// Config with per-task default knobs at an explicit scale.
    pub fn new(task: TaskKind, n: usize, m: usize) -> Self {
        let literal_prob = match task {
            TaskKind::Dnf3 | TaskKind::Cnf3 => 0.2,
            _ => 0.3,
        };
        let balance_fraction = if task.balance_target().is_some() { 0.3 } else { 0.0 };
        let sparsity = match task {
            TaskKind::SparseParity => 2,
            _ => 3,
        };
        TaskConfig {
            task,
            n,
            m,
            literal_prob,
            balance_fraction,
            noise_rate: 0.0,
            sparsity,
            bias_bound: 3,
            weight_bound: 3,
            seed_len: 20,
            ood_literal_prob: None,
            shuffle_teach: false,
        }
    }

    /// Full-size experimental scale for each task.
    pub fn full(task: TaskKind) -> Self {
        let (n, m) = match task {
            TaskKind::Conjunction | TaskKind::Disjunction => (28, 70),
            TaskKind::SparseDisjunction => (50, 70),
            TaskKind::Dnf3 | TaskKind::Cnf3 => (28, 100),
            TaskKind::Parity => (20, 140),
            TaskKind::SparseParity => (10, 140),
            TaskKind::Majority => (28, 100),
            TaskKind::ThresholdZeroOne => (28, 70),
            TaskKind::IntegerHalfspace => (20, 70),
            TaskKind::NearestNeighbor => (10, 100),
        };
        TaskConfig::new(task, n, m)
    }

    /// Reduced scale sized for single-CPU training runs.
    pub fn desk(task: TaskKind) -> Self {
        let (n, m) = match task {
            TaskKind::Conjunction | TaskKind::Disjunction => (14, 40),
            TaskKind::SparseDisjunction => (20, 40),
            TaskKind::Dnf3 | TaskKind::Cnf3 => (10, 60),
            TaskKind::Parity => (10, 140),
            TaskKind::SparseParity => (10, 140),
            TaskKind::Majority => (14, 60),
            TaskKind::ThresholdZeroOne => (14, 40),
            TaskKind::IntegerHalfspace => (10, 40),
            TaskKind::NearestNeighbor => (10, 100),
        };
        TaskConfig::new(task, n, m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("task config", "n and m must be positive"));
        }
        if !(0.0..=1.0).contains(&self.literal_prob) {
            return Err(Error::invalid("task config", "literal_prob must lie in [0, 1]"));
        }
        if !(0.0..=0.5).contains(&self.balance_fraction) {
            return Err(Error::invalid("task config", "balance_fraction must lie in [0, 0.5]"));
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return Err(Error::invalid("task config", "noise_rate must lie in [0, 0.5)"));
        }
        if let Some(p) = self.ood_literal_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("task config", "ood_literal_prob must lie in [0, 1]"));
            }
        }
        match self.task {
            TaskKind::SparseDisjunction | TaskKind::SparseParity => {
                if self.sparsity == 0 || self.sparsity > self.n {
                    return Err(Error::invalid("task config", "sparsity must lie in 1..=n"));
                }
            }
            TaskKind::NearestNeighbor if self.seed_len == 0 || self.seed_len >= self.m => {
                return Err(Error::invalid("task config", "seed_len must lie in 1..m"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Copy with a different literal probability (used by the
    /// out-of-distribution evaluation path).
    pub fn with_literal_prob(&self, p: f64) -> Self {
        let mut cfg = self.clone();
        cfg.literal_prob = p;
        cfg
    }
}

/// One learning problem: `m` labeled points, an optional teaching prefix of
/// length `teach_len`, and provenance (generator function, stream seed).
#[derive(Clone, Debug, PartialEq)]
pub struct PromptSequence {
    pub xs: Vec<BitVec>,
    pub ys: Vec<u8>,
    pub teach_len: usize,
    /// Absent only for the nearest-neighbor task, which has no generator
    /// function.
    pub func: Option<FunctionSpec>,
    pub seed: u64,
    pub task_tag: String,
}

impl PromptSequence {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.xs.first().map_or(0, BitVec::len)
    }
}

fn sample_literal_set(n: usize, p: f64, signed: bool, rng: &mut impl Rng) -> Vec<Literal> {
    loop {
        let mut lits = Vec::new();
        for index in 0..n {
            if rng.gen_bool(p) {
                let neg = signed && rng.gen_bool(0.5);
                lits.push(Literal { index, neg });
            }
        }
        if !lits.is_empty() {
            return lits;
        }
    }
}

fn sample_index_set(n: usize, p: f64, rng: &mut impl Rng) -> Vec<usize> {
    loop {
        let indices: Vec<usize> = (0..n).filter(|_| rng.gen_bool(p)).collect();
        if !indices.is_empty() {
            return indices;
        }
    }
}

/// Draw one function from the task's function distribution. Literal-sampled
/// classes (conjunction-like, majority, DNF/CNF clauses) resample empty
/// results, so constant degenerate functions never appear; sparse classes
/// draw uniformly from the class with the empty member excluded.
pub fn sample_function(cfg: &TaskConfig, rng: &mut impl Rng) -> Result<FunctionSpec> {
    cfg.validate()?;
    let n = cfg.n;
    let p = cfg.literal_prob;
    match cfg.task {
        TaskKind::Conjunction => FunctionSpec::conjunction(n, sample_literal_set(n, p, true, rng)),
        TaskKind::Disjunction => FunctionSpec::disjunction(n, sample_literal_set(n, p, true, rng)),
        TaskKind::SparseDisjunction => {
            // Uniform over non-empty disjunctions with at most k literals:
            // pick the size j proportional to C(n,j)·2^j, then a uniform
            // j-subset and uniform signs.
            let k = cfg.sparsity;
            let weights: Vec<f64> = (1..=k)
                .map(|j| {
                    let mut c = 1f64;
                    for t in 0..j {
                        c = c * (n - t) as f64 / (t + 1) as f64;
                    }
                    c * (1u64 << j) as f64
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.gen_range(0.0..total);
            let mut size = k;
            for (j, w) in weights.iter().enumerate() {
                if u < *w {
                    size = j + 1;
                    break;
                }
                u -= w;
            }
            let subset = sample_indices(rng, n, size);
            let lits = subset
                .iter()
                .map(|index| Literal { index, neg: rng.gen_bool(0.5) })
                .collect();
            FunctionSpec::sparse_disjunction(n, lits, k)
        }
        TaskKind::Dnf3 => {
            let clauses = [
                sample_literal_set(n, p, true, rng),
                sample_literal_set(n, p, true, rng),
                sample_literal_set(n, p, true, rng),
            ];
            FunctionSpec::dnf3(n, clauses)
        }
        TaskKind::Cnf3 => {
            let clauses = [
                sample_literal_set(n, p, true, rng),
                sample_literal_set(n, p, true, rng),
                sample_literal_set(n, p, true, rng),
            ];
            FunctionSpec::cnf3(n, clauses)
        }
        TaskKind::Parity => {
            // Uniform over all 2^n subsets, empty included.
            let indices = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            FunctionSpec::parity(n, indices)
        }
        TaskKind::SparseParity => {
            let subset = sample_indices(rng, n, cfg.sparsity).into_vec();
            FunctionSpec::sparse_parity(n, subset)
        }
        TaskKind::Majority => FunctionSpec::majority(n, sample_index_set(n, p, rng)),
        TaskKind::ThresholdZeroOne => {
            let weights = (0..n).map(|_| rng.gen_range(0..=1u8)).collect();
            let bias = rng.gen_range(-cfg.bias_bound..=cfg.bias_bound);
            FunctionSpec::threshold_zero_one(n, weights, bias)
        }
        TaskKind::IntegerHalfspace => {
            let weights = (0..n).map(|_| rng.gen_range(-cfg.weight_bound..=cfg.weight_bound)).collect();
            FunctionSpec::integer_halfspace(n, weights)
        }
        TaskKind::NearestNeighbor => Ok(FunctionSpec::nearest_neighbor(n, cfg.seed_len)),
    }
}

/// Rewrite a uniformly chosen `round(fraction·|xs|)`-subset of points so the
/// target function labels them with its minority class: conjunction-like
/// targets get every literal satisfied (label 1), disjunction-like targets
/// every literal falsified (label 0); three-clause formulas apply the rewrite
/// clause by clause, later clauses winning on shared variables, so the forced
/// label is best-effort there and labels are always recomputed afterwards.
/// Untouched coordinates keep their uniform values.
pub fn balance_prompt(xs: &mut [BitVec], f: &FunctionSpec, fraction: f64, rng: &mut impl Rng) {
    let count = (fraction * xs.len() as f64).round() as usize;
    if count == 0 {
        return;
    }
    let chosen = sample_indices(rng, xs.len(), count.min(xs.len()));
    for i in chosen {
        force_point(&mut xs[i], f);
    }
}

fn force_point(x: &mut BitVec, f: &FunctionSpec) {
    match &f.kind {
        FunctionKind::Conjunction(lits) => {
            for l in lits {
                x.set(l.index, l.satisfying_bit());
            }
        }
        FunctionKind::Disjunction(lits) | FunctionKind::SparseDisjunction { literals: lits, .. } => {
            for l in lits {
                x.set(l.index, l.falsifying_bit());
            }
        }
        FunctionKind::Dnf3(clauses) => {
            for clause in clauses {
                for l in clause {
                    x.set(l.index, l.falsifying_bit());
                }
            }
        }
        FunctionKind::Cnf3(clauses) => {
            for clause in clauses {
                for l in clause {
                    x.set(l.index, l.satisfying_bit());
                }
            }
        }
        _ => {}
    }
}

/// Nearest-neighbor labels given explicit labels for the seed block: each
/// point after the block copies the label of its maximum-cosine-similarity
/// predecessor (similarity ties broken by smallest index; the all-zeros
/// vector has similarity 0 to everything). Comparisons are exact integer
/// arithmetic, so ties are real ties.
pub fn nearest_neighbor_labels_from_seed(xs: &[BitVec], seed_labels: &[u8]) -> Result<Vec<u8>> {
    let seed_len = seed_labels.len();
    if seed_len == 0 || seed_len >= xs.len() {
        return Err(Error::invalid("nn labeling", "need 0 < seed_len < number of points"));
    }
    let norms: Vec<u64> = xs.iter().map(|x| x.dot(x)).collect();
    let mut ys: Vec<u8> = seed_labels.to_vec();
    for i in seed_len..xs.len() {
        let mut best = 0usize;
        let mut best_dot = xs[i].dot(&xs[0]);
        for j in 1..i {
            let d = xs[i].dot(&xs[j]);
            if cmp_cosine(d, norms[j], best_dot, norms[best]) == Ordering::Greater {
                best = j;
                best_dot = d;
            }
        }
        ys.push(ys[best]);
    }
    Ok(ys)
}

/// Draw uniform seed-block labels, then propagate nearest-neighbor labels.
pub fn label_nearest_neighbor_task(
    xs: &[BitVec],
    seed_len: usize,
    rng: &mut impl Rng,
) -> Result<Vec<u8>> {
    if seed_len == 0 || seed_len >= xs.len() {
        return Err(Error::invalid("nn labeling", "need 0 < seed_len < number of points"));
    }
    let seed_labels: Vec<u8> = (0..seed_len).map(|_| rng.gen_range(0..=1u8)).collect();
    nearest_neighbor_labels_from_seed(xs, &seed_labels)
}

/// Sample one complete prompt for `f` under `cfg`: uniform inputs, balancing
/// when the task calls for it, labels recomputed from `f` afterwards.
pub fn sample_prompt(cfg: &TaskConfig, f: &FunctionSpec, rng: &mut impl Rng) -> Result<PromptSequence> {
    sample_prompt_seeded(cfg, f, rng.gen(), rng)
}

fn sample_prompt_seeded(
    cfg: &TaskConfig,
    f: &FunctionSpec,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<PromptSequence> {
    let mut xs: Vec<BitVec> = (0..cfg.m).map(|_| BitVec::uniform(cfg.n, rng)).collect();
    if cfg.balance_fraction > 0.0 && cfg.task.balance_target().is_some() {
        balance_prompt(&mut xs, f, cfg.balance_fraction, rng);
    }
    let ys = xs.iter().map(|x| evaluate(f, x)).collect::<Result<Vec<u8>>>()?;
    Ok(PromptSequence {
        xs,
        ys,
        teach_len: 0,
        func: Some(f.clone()),
        seed,
        task_tag: cfg.task.tag().to_string(),
    })
}

/// Sample a fresh function (or the nearest-neighbor labeler) and a prompt
/// for it, fully determined by `seed`.
pub fn sample_sequence_with_seed(cfg: &TaskConfig, seed: u64) -> Result<PromptSequence> {
    let mut rng = TaskRng::seed_from_u64(seed);
    if cfg.task == TaskKind::NearestNeighbor {
        cfg.validate()?;
        let xs: Vec<BitVec> = (0..cfg.m).map(|_| BitVec::uniform(cfg.n, &mut rng)).collect();
        let ys = label_nearest_neighbor_task(&xs, cfg.seed_len, &mut rng)?;
        return Ok(PromptSequence {
            xs,
            ys,
            teach_len: 0,
            func: None,
            seed,
            task_tag: cfg.task.tag().to_string(),
        });
    }
    let f = sample_function(cfg, &mut rng)?;
    sample_prompt_seeded(cfg, &f, seed, &mut rng)
}

/// Sample a sequence with a seed drawn from `rng` (recorded in the result).
pub fn sample_sequence(cfg: &TaskConfig, rng: &mut impl Rng) -> Result<PromptSequence> {
    sample_sequence_with_seed(cfg, rng.gen())
}

/// Flip each label independently with probability `rate`.
pub fn apply_label_noise(seq: &mut PromptSequence, rate: f64, rng: &mut impl Rng) {
    if rate <= 0.0 {
        return;
    }
    for y in &mut seq.ys {
        if rng.gen_bool(rate) {
            *y = 1 - *y;
        }
    }
}

/// A fixed collection of pre-sampled sequences; when active, training draws
/// only from this list (uniformly, with replacement).
#[derive(Clone, Debug, PartialEq)]
pub struct SequencePool {
    pub sequences: Vec<PromptSequence>,
}

impl SequencePool {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Build a pool of `count` sequences; element `i` is fully determined by
/// `derive_seed(master_seed, i)`, so equal inputs give element-wise equal
/// pools.
pub fn make_pool(cfg: &TaskConfig, count: usize, master_seed: u64) -> Result<SequencePool> {
    let sequences = (0..count)
        .map(|i| sample_sequence_with_seed(cfg, derive_seed(master_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SequencePool { sequences })
}

/// Draw a batch uniformly with replacement from the pool.
pub fn draw_from_pool(pool: &SequencePool, batch: usize, rng: &mut impl Rng) -> Vec<PromptSequence> {
    (0..batch)
        .map(|_| pool.sequences[rng.gen_range(0..pool.sequences.len())].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rng(seed: u64) -> TaskRng {
        TaskRng::seed_from_u64(seed)
    }

    #[test]
    fn conjunction_sampling_frequencies() {
        // Conditional on resampling empties away, per-index inclusion is
        // p/(1-(1-p)^n): ~0.340 at n=6, and 0.300 to 4 decimals at n=28.
        let mut r = rng(7);
        for (n, expect, tol, samples) in [(6usize, 0.3 / (1.0 - 0.7f64.powi(6)), 0.01, 100_000), (28, 0.3, 0.01, 20_000)] {
            let cfg = TaskConfig::new(TaskKind::Conjunction, n, 1);
            let mut included = vec![0usize; n];
            let mut pos = 0usize;
            let mut neg = 0usize;
            for _ in 0..samples {
                let f = sample_function(&cfg, &mut r).unwrap();
                let FunctionKind::Conjunction(lits) = &f.kind else { unreachable!() };
                assert!(!lits.is_empty());
                for l in lits {
                    included[l.index] += 1;
                    if l.neg {
                        neg += 1;
                    } else {
                        pos += 1;
                    }
                }
            }
            for (i, &c) in included.iter().enumerate() {
                let freq = c as f64 / samples as f64;
                assert!((freq - expect).abs() < tol, "n={n} index {i}: freq {freq} vs {expect}");
            }
            let ratio = pos as f64 / neg as f64;
            assert!((ratio - 1.0).abs() < 0.05, "sign ratio {ratio}");
        }
    }

    #[test]
    fn expected_literal_count_at_full_scale() {
        let cfg = TaskConfig::new(TaskKind::Conjunction, 28, 1);
        let mut r = rng(11);
        let samples = 20_000;
        let total: usize = (0..samples)
            .map(|_| {
                let f = sample_function(&cfg, &mut r).unwrap();
                let FunctionKind::Conjunction(lits) = f.kind else { unreachable!() };
                lits.len()
            })
            .sum();
        let mean = total as f64 / samples as f64;
        assert!((mean - 8.4).abs() < 0.1, "mean literal count {mean}");
    }

    #[test]
    fn sparse_classes_respect_sparsity() {
        let mut r = rng(13);
        let cfg = TaskConfig::new(TaskKind::SparseParity, 10, 1);
        for _ in 0..200 {
            let f = sample_function(&cfg, &mut r).unwrap();
            let FunctionKind::SparseParity(idx) = f.kind else { unreachable!() };
            assert_eq!(idx.len(), 2);
        }
        let cfg = TaskConfig::new(TaskKind::SparseDisjunction, 5, 1);
        for _ in 0..200 {
            let f = sample_function(&cfg, &mut r).unwrap();
            let FunctionKind::SparseDisjunction { literals, .. } = f.kind else { unreachable!() };
            assert!(!literals.is_empty() && literals.len() <= 3);
        }
    }

    #[test]
    fn sparse_disjunction_sampling_is_uniform() {
        // n=5, k=3 has 130 non-empty members; check every one is hit at a
        // frequency close to uniform.
        let cfg = TaskConfig::new(TaskKind::SparseDisjunction, 5, 1);
        let mut r = rng(17);
        let samples = 78_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..samples {
            let f = sample_function(&cfg, &mut r).unwrap();
            let FunctionKind::SparseDisjunction { literals, .. } = &f.kind else { unreachable!() };
            let key: Vec<(usize, bool)> = literals.iter().map(|l| (l.index, l.neg)).collect();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 130);
        let mean = samples as f64 / 130.0;
        for (key, c) in counts {
            let rel = c as f64 / mean;
            assert!((rel - 1.0).abs() < 0.25, "member {key:?} relative frequency {rel}");
        }
    }

    #[test]
    fn uniform_parity_includes_all_subsets() {
        let cfg = TaskConfig::new(TaskKind::Parity, 3, 1);
        let mut r = rng(19);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..500 {
            let f = sample_function(&cfg, &mut r).unwrap();
            let FunctionKind::Parity(idx) = f.kind else { unreachable!() };
            seen.insert(idx);
        }
        assert_eq!(seen.len(), 8, "all 2^3 subsets incl. empty should appear");
    }

    #[test]
    fn threshold_and_halfspace_ranges() {
        let mut r = rng(23);
        let cfg = TaskConfig::new(TaskKind::ThresholdZeroOne, 6, 1);
        for _ in 0..200 {
            let f = sample_function(&cfg, &mut r).unwrap();
            let FunctionKind::ThresholdZeroOne { weights, bias } = f.kind else { unreachable!() };
            assert!(weights.iter().all(|&w| w <= 1));
            assert!((-3..=3).contains(&bias));
        }
        let cfg = TaskConfig::new(TaskKind::IntegerHalfspace, 6, 1);
        for _ in 0..200 {
            let f = sample_function(&cfg, &mut r).unwrap();
            let FunctionKind::IntegerHalfspace { weights } = f.kind else { unreachable!() };
            assert!(weights.iter().all(|&w| (-3..=3).contains(&w)));
        }
    }

    #[test]
    fn balanced_conjunction_prompts() {
        let cfg = TaskConfig::full(TaskKind::Conjunction);
        let mut r = rng(29);
        let mut positive = 0usize;
        let mut total = 0usize;
        for _ in 0..1000 {
            let seq = sample_sequence(&cfg, &mut r).unwrap();
            positive += seq.ys.iter().filter(|&&y| y == 1).count();
            total += seq.ys.len();
            // Labels always come from the function, balancing or not.
            let f = seq.func.as_ref().unwrap();
            for (x, y) in seq.xs.iter().zip(&seq.ys) {
                assert_eq!(evaluate(f, x).unwrap(), *y);
            }
        }
        let frac = positive as f64 / total as f64;
        assert!(frac >= 0.29, "positive fraction {frac}");
        // The rewrite itself forces the label deterministically for plain
        // conjunctions and disjunctions.
        let mut r2 = rng(31);
        for _ in 0..200 {
            let f = sample_function(&cfg, &mut r2).unwrap();
            let mut x = BitVec::uniform(cfg.n, &mut r2);
            force_point(&mut x, &f);
            assert_eq!(evaluate(&f, &x).unwrap(), 1);
        }
        let dcfg = TaskConfig::full(TaskKind::Disjunction);
        for _ in 0..200 {
            let f = sample_function(&dcfg, &mut r2).unwrap();
            let mut x = BitVec::uniform(dcfg.n, &mut r2);
            force_point(&mut x, &f);
            assert_eq!(evaluate(&f, &x).unwrap(), 0);
        }
    }

    #[test]
    fn balancing_preserves_untouched_marginals() {
        let cfg = TaskConfig::new(TaskKind::Conjunction, 14, 40);
        let mut r = rng(37);
        let mut ones = 0u64;
        let mut total = 0u64;
        for _ in 0..10_000 {
            let seq = sample_sequence(&cfg, &mut r).unwrap();
            let f = seq.func.as_ref().unwrap();
            let FunctionKind::Conjunction(lits) = &f.kind else { unreachable!() };
            let relevant: std::collections::HashSet<usize> = lits.iter().map(|l| l.index).collect();
            for x in &seq.xs {
                for i in 0..cfg.n {
                    if !relevant.contains(&i) {
                        ones += x.get(i) as u64;
                        total += 1;
                    }
                }
            }
        }
        let mean = ones as f64 / total as f64;
        assert!((mean - 0.5).abs() < 0.02, "untouched-coordinate mean {mean}");
    }

    #[test]
    fn balance_count_is_rounded_fraction() {
        // With a function whose forcing touches every coordinate, count the
        // rewritten points exactly.
        let n = 8;
        let f = FunctionSpec::conjunction(n, (0..n).map(Literal::pos).collect()).unwrap();
        let mut r = rng(41);
        for (m, fraction, expect) in [(10usize, 0.3, 3usize), (70, 0.3, 21), (7, 0.3, 2), (5, 0.0, 0)] {
            let mut xs: Vec<BitVec> = (0..m).map(|_| BitVec::zeros(n)).collect();
            balance_prompt(&mut xs, &f, fraction, &mut r);
            let forced = xs.iter().filter(|x| x.ones() == n).count();
            assert_eq!(forced, expect, "m={m} fraction={fraction}");
        }
    }

    #[test]
    fn nn_labeling_basics() {
        let mut r = rng(43);
        // seed_len=1: every later point inherits the single seed label.
        let xs: Vec<BitVec> = (0..10).map(|_| BitVec::uniform(6, &mut r)).collect();
        let ys = nearest_neighbor_labels_from_seed(&xs, &[1]).unwrap();
        assert!(ys.iter().all(|&y| y == 1));

        // Exact cosine tie: the earlier point wins.
        let xs = vec![
            "1000".parse().unwrap(),
            "0100".parse().unwrap(),
            "1100".parse().unwrap(),
        ];
        let ys = nearest_neighbor_labels_from_seed(&xs, &[1, 0]).unwrap();
        assert_eq!(ys, vec![1, 0, 1]);

        // The all-zeros vector has similarity 0 to everything, so it loses
        // to any positive-similarity candidate regardless of norms.
        let xs = vec![
            "0000".parse().unwrap(),
            "1110".parse().unwrap(),
            "1000".parse().unwrap(),
        ];
        let ys = nearest_neighbor_labels_from_seed(&xs, &[1, 0]).unwrap();
        assert_eq!(ys[2], 0);

        // Propagation: later points may copy labels that were themselves
        // copied (all predecessors are candidates, not just the seed block).
        let xs = vec![
            "1000000".parse().unwrap(),
            "0111111".parse().unwrap(),
            "1100000".parse().unwrap(), // nearest: x0 -> label 1
            "1100011".parse().unwrap(), // nearest: x2 -> inherits 1
        ];
        let ys = nearest_neighbor_labels_from_seed(&xs, &[1, 0]).unwrap();
        assert_eq!(ys, vec![1, 0, 1, 1]);
    }

    #[test]
    fn nn_labels_are_seed_permutation_covariant() {
        let mut r = rng(47);
        let seed_len = 5;
        let xs: Vec<BitVec> = (0..30).map(|_| BitVec::uniform(8, &mut r)).collect();
        let seed_labels: Vec<u8> = (0..seed_len).map(|_| rand::Rng::gen_range(&mut r, 0..=1u8)).collect();
        let base = nearest_neighbor_labels_from_seed(&xs, &seed_labels).unwrap();
        // Rotate the seed block (points and labels together).
        let mut xs2 = xs.clone();
        xs2[0..seed_len].rotate_left(2);
        let mut sl2 = seed_labels.clone();
        sl2.rotate_left(2);
        let permuted = nearest_neighbor_labels_from_seed(&xs2, &sl2).unwrap();
        assert_eq!(base[seed_len..], permuted[seed_len..]);
    }

    #[test]
    fn nn_task_sequences() {
        let cfg = TaskConfig::full(TaskKind::NearestNeighbor);
        let seq = sample_sequence_with_seed(&cfg, 99).unwrap();
        assert_eq!(seq.len(), 100);
        assert!(seq.func.is_none());
        assert_eq!(seq.teach_len, 0);
        // Labels beyond the seed block reproduce exactly from the stored xs
        // and the seed-block labels.
        let re = nearest_neighbor_labels_from_seed(&seq.xs, &seq.ys[..cfg.seed_len]).unwrap();
        assert_eq!(re, seq.ys);
    }

    #[test]
    fn pools_are_deterministic_and_covered() {
        let cfg = TaskConfig::new(TaskKind::Conjunction, 8, 10);
        let a = make_pool(&cfg, 128, 1234).unwrap();
        let b = make_pool(&cfg, 128, 1234).unwrap();
        assert_eq!(a, b);
        let c = make_pool(&cfg, 128, 1235).unwrap();
        assert_ne!(a, c);
        let seeds: std::collections::HashSet<u64> = a.sequences.iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), 128);

        let mut r = rng(53);
        let mut drawn = std::collections::HashSet::new();
        for _ in 0..100 {
            for seq in draw_from_pool(&a, 100, &mut r) {
                drawn.insert(seq.seed);
            }
        }
        assert_eq!(drawn.len(), 128, "10^4 draws should cover a 128-pool");
    }

    #[test]
    fn label_noise_flips_and_preserves_symmetry() {
        let cfg = TaskConfig::new(TaskKind::Parity, 10, 100);
        let mut r = rng(59);
        let mut ones = 0usize;
        let mut total = 0usize;
        let mut flipped = 0usize;
        for _ in 0..300 {
            let mut seq = sample_sequence(&cfg, &mut r).unwrap();
            let clean = seq.ys.clone();
            apply_label_noise(&mut seq, 0.1, &mut r);
            flipped += seq.ys.iter().zip(&clean).filter(|(a, b)| a != b).count();
            ones += seq.ys.iter().filter(|&&y| y == 1).count();
            total += seq.ys.len();
        }
        let flip_rate = flipped as f64 / total as f64;
        assert!((flip_rate - 0.1).abs() < 0.01, "flip rate {flip_rate}");
        let mean = ones as f64 / total as f64;
        assert!((mean - 0.5).abs() < 0.02, "noisy parity label mean {mean}");

        let mut seq = sample_sequence(&cfg, &mut r).unwrap();
        let clean = seq.ys.clone();
        apply_label_noise(&mut seq, 0.0, &mut r);
        assert_eq!(seq.ys, clean);
    }

    #[test]
    fn sequences_are_seed_deterministic() {
        for task in TaskKind::ALL {
            let cfg = TaskConfig::desk(task);
            let a = sample_sequence_with_seed(&cfg, 777).unwrap();
            let b = sample_sequence_with_seed(&cfg, 777).unwrap();
            assert_eq!(a, b, "task {task}");
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = TaskConfig::new(TaskKind::Conjunction, 8, 10);
        cfg.balance_fraction = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg = TaskConfig::new(TaskKind::NearestNeighbor, 8, 10);
        cfg.seed_len = 10;
        assert!(cfg.validate().is_err());
        let mut cfg = TaskConfig::new(TaskKind::SparseParity, 4, 10);
        cfg.sparsity = 5;
        assert!(cfg.validate().is_err());
        assert!(TaskConfig::new(TaskKind::Parity, 8, 10).validate().is_ok());
        for task in TaskKind::ALL {
            assert!(TaskConfig::full(task).validate().is_ok());
            assert!(TaskConfig::desk(task).validate().is_ok());
            assert_eq!(task.tag().parse::<TaskKind>().unwrap(), task);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn labels_always_match_the_generator(
            seed in any::<u64>(),
            task_i in 0usize..10, // all labeled-function tasks
            n in 4usize..10,
            m in 2usize..30,
        ) {
            let task = TaskKind::ALL[task_i];
            prop_assume!(task != TaskKind::NearestNeighbor);
            let mut cfg = TaskConfig::new(task, n, m);
            cfg.sparsity = cfg.sparsity.min(n);
            let seq = sample_sequence_with_seed(&cfg, seed).unwrap();
            let f = seq.func.as_ref().unwrap();
            prop_assert_eq!(seq.len(), m);
            for (x, y) in seq.xs.iter().zip(&seq.ys) {
                prop_assert_eq!(evaluate(f, x).unwrap(), *y);
            }
        }
    }
}
