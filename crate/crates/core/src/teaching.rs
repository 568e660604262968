//! Teaching sequences: short canonical example lists that pin a function
//! down to a single member of its class, plus prompt assembly that prefixes
//! a prompt with the teaching block and the 50/50 mixture distribution of
//! teach and vanilla prompts.

use crate::bits::BitVec;
use crate::boolfn::{evaluate, FunctionKind, FunctionSpec, Literal};
use crate::sampler::{balance_prompt, sample_function, PromptSequence, TaskConfig, TaskRng};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// An ordered list of labeled points identifying `owner` within its class.
/// `non_minimal` is set when clause overlap in a three-clause formula breaks
/// the intended isolation pattern: the labels are still exact (always
/// recomputed from `owner`), but uniqueness is no longer guaranteed.
#[derive(Clone, Debug, PartialEq)]
pub struct TeachingSequence {
    pub points: Vec<(BitVec, u8)>,
    pub owner: FunctionSpec,
    pub non_minimal: bool,
}

impl TeachingSequence {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn labeled(owner: &FunctionSpec, x: BitVec) -> Result<(BitVec, u8)> {
    let y = evaluate(owner, &x)?;
    Ok((x, y))
}

/// `k+2` points for a non-empty conjunction: the satisfying assignment with
/// irrelevant bits 0, the same with irrelevant bits 1, then one point per
/// literal (ascending index) with only that literal falsified and irrelevant
/// bits 0.
pub fn teach_conjunction(f: &FunctionSpec) -> Result<TeachingSequence> {
    let FunctionKind::Conjunction(lits) = &f.kind else {
        return Err(Error::invalid("teaching", "teach_conjunction needs a conjunction"));
    };
    if lits.is_empty() {
        return Err(Error::invalid("teaching", "the empty conjunction has no teaching sequence"));
    }
    let mut points = Vec::with_capacity(lits.len() + 2);
    let mut low = BitVec::zeros(f.n);
    let mut high = BitVec::from_bits(vec![1; f.n])?;
    for l in lits {
        low.set(l.index, l.satisfying_bit());
        high.set(l.index, l.satisfying_bit());
    }
    points.push(labeled(f, low.clone())?);
    points.push(labeled(f, high)?);
    for l in lits {
        let mut x = low.clone();
        x.set(l.index, l.falsifying_bit());
        points.push(labeled(f, x)?);
    }
    Ok(TeachingSequence { points, owner: f.clone(), non_minimal: false })
}

/// De Morgan dual of [`teach_conjunction`]: two all-falsified points labeled
/// 0 (irrelevant bits 0, then 1), then one point per literal with only that
/// literal satisfied, labeled 1.
pub fn teach_disjunction(f: &FunctionSpec) -> Result<TeachingSequence> {
    let lits = match &f.kind {
        FunctionKind::Disjunction(lits) | FunctionKind::SparseDisjunction { literals: lits, .. } => lits,
        _ => return Err(Error::invalid("teaching", "teach_disjunction needs a disjunction")),
    };
    if lits.is_empty() {
        return Err(Error::invalid("teaching", "the empty disjunction has no teaching sequence"));
    }
    let mut points = Vec::with_capacity(lits.len() + 2);
    let mut low = BitVec::zeros(f.n);
    let mut high = BitVec::from_bits(vec![1; f.n])?;
    for l in lits {
        low.set(l.index, l.falsifying_bit());
        high.set(l.index, l.falsifying_bit());
    }
    points.push(labeled(f, low.clone())?);
    points.push(labeled(f, high)?);
    for l in lits {
        let mut x = low.clone();
        x.set(l.index, l.satisfying_bit());
        points.push(labeled(f, x)?);
    }
    Ok(TeachingSequence { points, owner: f.clone(), non_minimal: false })
}

/// Shared three-clause construction. Per clause: a base point where that
/// clause is decisive (its own literals flipped one way, every other
/// clause's literals the other way, applied left to right with the focal
/// clause winning conflicts), then one point per literal with that literal
/// flipped. Variables in no clause sit at 0 for DNFs and at 1 for CNFs: a
/// spurious extra variable makes a conjunctive term harder to satisfy but a
/// disjunctive clause easier, so each form needs the background that refutes
/// it (the two settings are exchanged by De Morgan). Labels are recomputed
/// from `f`; when clause overlap makes a label deviate from the intended
/// isolation pattern the sequence is flagged non-minimal.
fn teach_three_clause(
    f: &FunctionSpec,
    clauses: &[Vec<Literal>; 3],
    own_satisfies: bool,
    base_label: u8,
) -> Result<TeachingSequence> {
    if clauses.iter().any(Vec::is_empty) {
        return Err(Error::invalid("teaching", "three-clause teaching needs non-empty clauses"));
    }
    let mut points = Vec::new();
    let mut non_minimal = false;
    for (ci, clause) in clauses.iter().enumerate() {
        let background = if own_satisfies { 0 } else { 1 };
        let mut base = BitVec::from_bits(vec![background; f.n])?;
        for (cj, other) in clauses.iter().enumerate() {
            if cj == ci {
                continue;
            }
            for l in other {
                let bit = if own_satisfies { l.falsifying_bit() } else { l.satisfying_bit() };
                base.set(l.index, bit);
            }
        }
        for l in clause {
            let bit = if own_satisfies { l.satisfying_bit() } else { l.falsifying_bit() };
            base.set(l.index, bit);
        }
        let (x, y) = labeled(f, base.clone())?;
        non_minimal |= y != base_label;
        points.push((x, y));
        for l in clause {
            let mut flipped = base.clone();
            let bit = if own_satisfies { l.falsifying_bit() } else { l.satisfying_bit() };
            flipped.set(l.index, bit);
            let (x, y) = labeled(f, flipped)?;
            non_minimal |= y != 1 - base_label;
            points.push((x, y));
        }
    }
    Ok(TeachingSequence { points, owner: f.clone(), non_minimal })
}

/// `l+3` points for a three-term DNF (`l` = total literal count): per term,
/// the point satisfying exactly that term (other terms falsified), then one
/// point per literal with that literal falsified.
pub fn teach_dnf3(f: &FunctionSpec) -> Result<TeachingSequence> {
    let FunctionKind::Dnf3(clauses) = &f.kind else {
        return Err(Error::invalid("teaching", "teach_dnf3 needs a three-term DNF"));
    };
    teach_three_clause(f, clauses, true, 1)
}

/// Dual of [`teach_dnf3`] for three-clause CNFs: per clause, the point
/// falsifying exactly that clause (other clauses satisfied) labeled 0, then
/// one point per literal with that literal satisfied, labeled 1.
pub fn teach_cnf3(f: &FunctionSpec) -> Result<TeachingSequence> {
    let FunctionKind::Cnf3(clauses) = &f.kind else {
        return Err(Error::invalid("teaching", "teach_cnf3 needs a three-clause CNF"));
    };
    teach_three_clause(f, clauses, false, 0)
}

/// `k` one-hot points for a sparse parity, one per relevant bit; each is
/// labeled 1 (a single set relevant bit is odd). Unique within the
/// exactly-`k`-relevant-bits class, not within all parities.
pub fn teach_sparse_parity(f: &FunctionSpec) -> Result<TeachingSequence> {
    let FunctionKind::SparseParity(indices) = &f.kind else {
        return Err(Error::invalid("teaching", "teach_sparse_parity needs a sparse parity"));
    };
    if indices.is_empty() {
        return Err(Error::invalid("teaching", "the empty parity has no teaching sequence"));
    }
    let mut points = Vec::with_capacity(indices.len());
    for &i in indices {
        let mut x = BitVec::zeros(f.n);
        x.set(i, 1);
        points.push(labeled(f, x)?);
    }
    Ok(TeachingSequence { points, owner: f.clone(), non_minimal: false })
}

/// Dispatch to the constructor for `f`'s class; classes without a teaching
/// recipe are rejected.
pub fn teaching_sequence(f: &FunctionSpec) -> Result<TeachingSequence> {
    match &f.kind {
        FunctionKind::Conjunction(_) => teach_conjunction(f),
        FunctionKind::Disjunction(_) | FunctionKind::SparseDisjunction { .. } => teach_disjunction(f),
        FunctionKind::Dnf3(_) => teach_dnf3(f),
        FunctionKind::Cnf3(_) => teach_cnf3(f),
        FunctionKind::SparseParity(_) => teach_sparse_parity(f),
        _ => Err(Error::Unsupported(format!(
            "no teaching construction for the {} class",
            f.class_name()
        ))),
    }
}

/// Prompt whose first `t` points are the teaching sequence of `f` and whose
/// remaining `m - t` points follow the task's usual input distribution
/// (balancing included). `cfg.shuffle_teach` permutes the teaching block.
pub fn assemble_teach_prompt(
    cfg: &TaskConfig,
    f: &FunctionSpec,
    rng: &mut impl Rng,
) -> Result<PromptSequence> {
    assemble_seeded(cfg, f, rng.gen(), rng)
}

fn assemble_seeded(
    cfg: &TaskConfig,
    f: &FunctionSpec,
    seed: u64,
    rng: &mut impl Rng,
) -> Result<PromptSequence> {
    let mut teach = teaching_sequence(f)?;
    if teach.len() > cfg.m {
        return Err(Error::invalid(
            "teach prompt",
            format!("teaching sequence length {} exceeds m={}", teach.len(), cfg.m),
        ));
    }
    if cfg.shuffle_teach {
        teach.points.shuffle(rng);
    }
    let teach_len = teach.len();
    let mut xs: Vec<BitVec> = Vec::with_capacity(cfg.m);
    let mut ys: Vec<u8> = Vec::with_capacity(cfg.m);
    for (x, y) in teach.points {
        xs.push(x);
        ys.push(y);
    }
    let mut suffix: Vec<BitVec> = (0..cfg.m - teach_len).map(|_| BitVec::uniform(cfg.n, rng)).collect();
    if cfg.balance_fraction > 0.0 && cfg.task.balance_target().is_some() {
        balance_prompt(&mut suffix, f, cfg.balance_fraction, rng);
    }
    for x in suffix {
        ys.push(evaluate(f, &x)?);
        xs.push(x);
    }
    Ok(PromptSequence {
        xs,
        ys,
        teach_len,
        func: Some(f.clone()),
        seed,
        task_tag: cfg.task.tag().to_string(),
    })
}

/// Sample a fresh function and its teach-prefixed prompt, fully determined
/// by `seed`.
pub fn sample_teach_sequence_with_seed(cfg: &TaskConfig, seed: u64) -> Result<PromptSequence> {
    let mut rng = TaskRng::seed_from_u64(seed);
    let f = sample_function(cfg, &mut rng)?;
    assemble_seeded(cfg, &f, seed, &mut rng)
}

/// Draw a teach-prefixed prompt with probability `teach_prob`, a vanilla
/// prompt otherwise; `teach_len` distinguishes the two downstream. Fully
/// determined by `seed`.
pub fn sample_mixture_with_seed(cfg: &TaskConfig, teach_prob: f64, seed: u64) -> Result<PromptSequence> {
    let mut rng = TaskRng::seed_from_u64(seed);
    // Pre-draw the coin, then reseed the branch identically to the
    // single-purpose samplers so each branch's conditional distribution
    // matches its dedicated generator exactly.
    let coin: u64 = rng.gen();
    let branch_seed = crate::sampler::derive_seed(seed, 1);
    if (coin as f64 / u64::MAX as f64) < teach_prob {
        sample_teach_sequence_with_seed(cfg, branch_seed)
    } else {
        crate::sampler::sample_sequence_with_seed(cfg, branch_seed)
    }
}
